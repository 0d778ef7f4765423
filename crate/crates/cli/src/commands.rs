//! One function per subcommand. Each reads its resolved section, writes its
//! outputs into `out` and returns a short report for stdout.

use std::path::Path;

use incentive_core::equilibrium::{
    pass_through, solve_path, solve_realized, verify_cancellation, verify_neutrality, Intervention, MarketPrimitives,
};
use incentive_core::gsls::estimate_system;
use incentive_core::ingest::generators::{
    detect_entry_exit, monthly_capacity, read_generators, resolve_balancing_authority, tabulate_entry_exit, Stage,
};
use incentive_core::ingest::intervals::read_five_minute;
use incentive_core::ingest::{
    build_design, summarize_by_incentive_state, Boundary, DesignSpec, FuelCategory, FuelMap, IntervalTable, Panel,
};
use incentive_core::matching::{balance_report, estimate_atet, mahalanobis_match, MatchData};
use incentive_core::robustness::{
    canonical_ladder, covariate_sequencing, keep_mask, sweep, underbid_fit, Filter, SweepResult,
};
use serde::Serialize;

use crate::config::{
    EquilibriumConfig, EstimateConfig, IngestConfig, LadderConfig, MatchConfig, SweepConfig, UnderbidConfig,
};
use crate::render::{effect_records, effects_text, number, starred, write_csv, write_text, TextTable, STAR_NOTE};
use crate::CliError;

/// Monthly data only supports the storm exclusion, applied to the lagged
/// source month.
fn apply_monthly_filters(design: &mut DesignSpec, filters: &[Filter]) -> Result<(), CliError> {
    for f in filters {
        match f {
            Filter::StormUri => {
                let m = Filter::storm_uri_month();
                if !design.exclude_source_months.contains(&m) {
                    design.exclude_source_months.push(m);
                }
            }
            Filter::PaymentCap => {
                return Err(CliError::Input("the payment_cap filter applies to interval data only".into()));
            }
        }
    }
    Ok(())
}

pub fn ingest(cfg: &IngestConfig, out: &Path) -> Result<String, CliError> {
    let fuel = match &cfg.fuel_map {
        Some(p) => FuelMap::from_path(p)?,
        None => FuelMap::default(),
    };
    let boundary = cfg.boundary.as_deref().map(Boundary::from_path).transpose()?;
    let records = read_generators(&cfg.generators)?;
    let resolved = resolve_balancing_authority(&records, boundary.as_ref(), &cfg.authority)?;
    let mine = resolved.in_authority(&cfg.authority);
    let ee = detect_entry_exit(&mine, &fuel)?;
    for w in &ee.warnings {
        log::warn!("{w}");
    }
    let table = tabulate_entry_exit(&ee)?;

    #[derive(Serialize)]
    struct StageRecord {
        stage: &'static str,
        category: String,
        units: usize,
        unit_share: f64,
        mean_mw: f64,
        total_mw: f64,
        mw_share: f64,
    }
    let mut records_out = Vec::new();
    let mut text = TextTable::new(
        &format!("Entry and exit, {} to {}", ee.first_month, ee.last_month),
        &["", "Category", "Units", "Share", "Mean MW", "Total MW", "MW share"],
    );
    for stage in Stage::ALL {
        let cats = FuelCategory::ALL.iter().map(|&c| (c.label().to_string(), Some(c)));
        for (label, cat) in cats.chain([("Total".to_string(), None)]) {
            let s = table.get(stage, cat).expect("every stage tabulated");
            text.push(vec![
                stage.label().into(),
                label.clone(),
                number(s.units as f64, 0),
                number(s.unit_share, 2),
                number(s.mean_mw, 1),
                number(s.total_mw, 1),
                number(s.mw_share, 2),
            ]);
            records_out.push(StageRecord {
                stage: stage.label(),
                category: label,
                units: s.units,
                unit_share: s.unit_share,
                mean_mw: s.mean_mw,
                total_mw: s.total_mw,
                mw_share: s.mw_share,
            });
        }
    }
    text.notes.push(format!(
        "{} codes filled within plant, {} by boundary, {} records excluded",
        resolved.filled_from_plant, resolved.filled_from_boundary, resolved.excluded
    ));
    write_csv(&out.join("entry_exit.csv"), &records_out)?;
    let mut report = text.render();
    write_text(&out.join("entry_exit.txt"), &report)?;

    let mut panel = monthly_capacity(&mine, &fuel)?.to_panel();
    for p in &cfg.panels {
        panel.merge(&Panel::read_csv(p)?)?;
    }
    panel.write_csv(&out.join("panel.csv"))?;

    if let Some(path) = &cfg.intervals {
        let mut intervals = IntervalTable::read_csv(path)?;
        let gaps = intervals.validate()?;
        if gaps > 0 {
            log::warn!("{gaps} gaps in the interval grid");
        }
        if let Some(five) = &cfg.five_minute_incentive {
            intervals.attach_five_minute(incentive_core::ingest::intervals::INCENTIVE, &read_five_minute(five)?)?;
        }
        let summary = summarize_by_incentive_state(&intervals)?;

        #[derive(Serialize)]
        struct SummaryRecord {
            column: String,
            all: f64,
            inactive: f64,
            active: Option<f64>,
        }
        let mut t = TextTable::new("Interval means by incentive state", &["", "All", "Inactive", "Active"]);
        let mut recs = Vec::new();
        for (k, c) in summary.columns.iter().enumerate() {
            let active = summary.active.as_ref().map(|a| a.means[k]);
            t.push(vec![
                c.clone(),
                number(summary.all.means[k], 2),
                number(summary.inactive.means[k], 2),
                active.map(|a| number(a, 2)).unwrap_or_default(),
            ]);
            recs.push(SummaryRecord {
                column: c.clone(),
                all: summary.all.means[k],
                inactive: summary.inactive.means[k],
                active,
            });
        }
        t.push(vec![
            "Intervals".into(),
            number(summary.all.count as f64, 0),
            number(summary.inactive.count as f64, 0),
            summary.active.as_ref().map(|a| number(a.count as f64, 0)).unwrap_or_default(),
        ]);
        write_csv(&out.join("interval_summary.csv"), &recs)?;
        let s = t.render();
        write_text(&out.join("interval_summary.txt"), &s)?;
        intervals.write_csv(&out.join("intervals.csv"))?;
        report.push('\n');
        report.push_str(&s);
    }
    Ok(report)
}

pub fn estimate(cfg: &EstimateConfig, out: &Path) -> Result<String, CliError> {
    let panel = Panel::read_csv(&cfg.panel)?;
    let mut design = cfg.design.clone();
    apply_monthly_filters(&mut design, &cfg.filters)?;
    let built = build_design(&panel, &design)?;
    let est = estimate_system(&built.design, &built.ordering)?;
    write_csv(&out.join("effects.csv"), &effect_records(&est.table))?;
    let mut text = effects_text(&est.table, &format!("Direct and total effects, {}-month lag", design.lag));
    text.push_str(&format!(
        "Total-effect identity: max |GSLS - recursion| = {:.3e} ({})\n",
        est.identity.max_abs_diff,
        if est.identity.passed { "holds" } else { "FAILS" }
    ));
    write_text(&out.join("effects.txt"), &text)?;
    if !est.identity.passed {
        return Err(CliError::Identity(est.identity.max_scaled_diff));
    }
    Ok(text)
}

pub fn equilibrium(cfg: &EquilibriumConfig, out: &Path) -> Result<String, CliError> {
    let m = &cfg.market;
    let prim = if m.d == 0.0 {
        MarketPrimitives::linear(m.a, m.b, m.c)?
    } else {
        MarketPrimitives::quadratic(m.a, m.b, m.c, m.d)?
    };
    let iv = &cfg.intervention;

    #[derive(Serialize)]
    struct PathRecord {
        regime: String,
        draw_id: usize,
        #[serde(rename = "Q")]
        quantity: f64,
        consumer_price: f64,
        producer_price: f64,
        deviation: f64,
        posted_price: f64,
        driver: f64,
        subsidy: f64,
        tax: f64,
    }
    let mut recs = Vec::new();
    let mut t = TextTable::new(
        "Equilibrium",
        &["Regime", "Q baseline", "P baseline", "max |dQ|", "max |dP|", "Neutrality", "Pass-through"],
    );
    for &regime in &cfg.regimes {
        let base = solve_realized(&prim, regime, Intervention::none().realize(0.0))?;
        let path = solve_path(&prim, iv, regime, cfg.draws)?;
        for p in &path {
            recs.push(PathRecord {
                regime: format!("{regime:?}").to_lowercase(),
                draw_id: p.draw,
                quantity: p.solution.quantity,
                consumer_price: p.solution.consumer_price,
                producer_price: p.solution.producer_price,
                deviation: p.deviation,
                posted_price: p.solution.posted_price,
                driver: p.driver,
                subsidy: p.transfers.subsidy,
                tax: p.transfers.tax,
            });
        }
        let (dq, dp) = if iv.is_paired() {
            let r = verify_cancellation(&prim, iv, regime, cfg.draws)?;
            (r.max_quantity_deviation, r.max_price_deviation)
        } else {
            let dq = path.iter().map(|p| (p.solution.quantity - base.quantity).abs()).fold(0.0, f64::max);
            let dp = path
                .iter()
                .map(|p| (p.solution.consumer_price - base.consumer_price).abs())
                .fold(0.0, f64::max);
            (dq, dp)
        };
        let neutral = verify_neutrality(&prim, iv, regime, cfg.draws)?;
        let pt = pass_through(&prim, 1.0, regime)?;
        t.push(vec![
            format!("{regime:?}").to_lowercase(),
            number(base.quantity, 4),
            number(base.consumer_price, 4),
            format!("{dq:.2e}"),
            format!("{dp:.2e}"),
            format!("{:.2e}", neutral.max_quantity_deviation.max(neutral.max_price_deviation)),
            number(pt, 4),
        ]);
    }
    t.notes.push(format!(
        "{} draws; intervention {}",
        cfg.draws,
        if iv.is_paired() { "paired" } else { "unpaired" }
    ));
    write_csv(&out.join("equilibrium.csv"), &recs)?;
    let s = t.render();
    write_text(&out.join("equilibrium.txt"), &s)?;
    Ok(s)
}

pub fn matching(cfg: &MatchConfig, out: &Path) -> Result<String, CliError> {
    let mut table = IntervalTable::read_csv(&cfg.intervals)?;
    if !cfg.filters.is_empty() {
        let keep = keep_mask(&table, &cfg.filters, &cfg.spec.outcome, &cfg.spec.treatment)?;
        table = table.filter(&keep);
    }
    if cfg.spec.block_by_year && table.get("year").is_none() {
        table.add_calendar();
    }
    let data = MatchData::from_intervals(&table, &cfg.spec)?;
    let matched = mahalanobis_match(&data, &cfg.spec)?;
    let atet = estimate_atet(&data, &matched)?;
    let balance = balance_report(&data, &matched);

    #[derive(Serialize)]
    struct PairRecord {
        treated: usize,
        control: usize,
        distance: f64,
    }
    let pairs: Vec<PairRecord> = matched
        .pairs
        .iter()
        .map(|p| PairRecord {
            treated: p.treated,
            control: p.control,
            distance: p.distance,
        })
        .collect();
    write_csv(&out.join("pairs.csv"), &pairs)?;
    write_csv(&out.join("balance.csv"), &balance.rows)?;

    let mut t = TextTable::new(
        "Covariate balance",
        &["", "Std diff raw", "Std diff matched", "Var ratio raw", "Var ratio matched"],
    );
    for r in &balance.rows {
        t.push(vec![
            r.covariate.clone(),
            number(r.std_diff_raw, 3),
            number(r.std_diff_matched, 3),
            number(r.var_ratio_raw, 3),
            number(r.var_ratio_matched, 3),
        ]);
    }
    let c = &matched.counts;
    let mut s = TextTable::new("Average treatment effect on the treated", &["", "Estimate"]);
    s.push(vec!["ATET".into(), starred(atet.coefficient, atet.p_value, 3)]);
    s.push(vec!["Std. error".into(), number(atet.std_error, 3)]);
    s.push(vec!["z".into(), number(atet.z, 2)]);
    s.push(vec!["Observations".into(), number(c.raw as f64, 0)]);
    s.push(vec!["Treated".into(), number(c.treated as f64, 0)]);
    s.push(vec!["Controls".into(), number(c.controls as f64, 0)]);
    s.push(vec!["Matched treated".into(), number(c.matched_treated as f64, 0)]);
    s.push(vec!["Distinct matched controls".into(), number(c.distinct_controls as f64, 0)]);
    s.notes.push(STAR_NOTE.into());
    let text = format!("{}\n{}", s.render(), t.render());
    write_text(&out.join("match.txt"), &text)?;
    Ok(text)
}

pub fn underbid(cfg: &UnderbidConfig, out: &Path) -> Result<String, CliError> {
    let table = IntervalTable::read_csv(&cfg.intervals)?;
    let r = underbid_fit(&table, &cfg.spec)?;
    let mut records = effect_records(&r.table);
    let mut text = effects_text(&r.table, "Underbidding regression");
    let mut t = TextTable::new("Incentive response", &["", "Direct", "Total"]);
    t.push(vec![
        "Incentive active".into(),
        starred(r.active.coef, r.active.p, 3),
        starred(r.active_total.coef, r.active_total.p, 3),
    ]);
    t.push(vec![
        "Incentive payment".into(),
        starred(r.payment.coef, r.payment.p, 4),
        starred(r.payment_total.coef, r.payment_total.p, 4),
    ]);
    t.push(vec![
        "Combined at mean active incentive".into(),
        number(r.combined_direct, 3),
        number(r.combined_total, 3),
    ]);
    for (h, e) in &r.ar_terms {
        t.push(vec![format!("Lagged error, {h} intervals"), starred(e.coef, e.p, 3), String::new()]);
    }
    t.notes.push(format!(
        "mean active incentive {}; {} intervals used, {} filtered, {} incomplete, {} without lagged errors",
        number(r.mean_active_incentive, 2),
        r.observations,
        r.dropped_by_filters,
        r.dropped_missing,
        r.dropped_for_lags
    ));
    if !r.ar_terms.is_empty() {
        t.notes.push(format!("max |corr(residual, lagged error)| {:.2e}", r.ar_orthogonality));
    }
    t.notes.push(STAR_NOTE.into());
    text.push_str(&t.render());
    records.retain(|x| !x.cause.is_empty());
    write_csv(&out.join("underbid.csv"), &records)?;
    write_text(&out.join("underbid.txt"), &text)?;
    Ok(text)
}

pub fn run_sweep(cfg: &SweepConfig, out: &Path) -> Result<String, CliError> {
    let panel = Panel::read_csv(&cfg.panel)?;
    let mut design = cfg.design.clone();
    apply_monthly_filters(&mut design, &cfg.filters)?;
    let result = sweep(&panel, &design, &cfg.grid)?;
    write_sweep(&result, out)?;
    let mut t = TextTable::new("Sweep", &["Outcome", "Models", "Failed", "Significant", "Positive and significant"]);
    for (o, pos) in &result.positive_significant {
        let rows: Vec<_> = result.rows.iter().filter(|r| &r.outcome == o).collect();
        t.push(vec![
            o.clone(),
            number(rows.len() as f64, 0),
            number(rows.iter().filter(|r| r.error.is_some()).count() as f64, 0),
            number(rows.iter().filter(|r| r.significant()).count() as f64, 0),
            number(*pos as f64, 0),
        ]);
    }
    t.notes.push("significance at 5%, two-sided".into());
    Ok(t.render())
}

fn write_sweep(result: &SweepResult, out: &Path) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Row<'a> {
        id: usize,
        outcome: &'a str,
        lag: usize,
        fe: &'a str,
        polynomial: bool,
        coefficient: f64,
        p_value: f64,
        signed_p: f64,
        observations: usize,
        error: &'a str,
    }
    let rows: Vec<Row> = result
        .rows
        .iter()
        .map(|r| Row {
            id: r.id,
            outcome: &r.outcome,
            lag: r.lag,
            fe: r.fe.label(),
            polynomial: r.polynomial,
            coefficient: r.coefficient,
            p_value: r.p_value,
            signed_p: r.signed_p,
            observations: r.observations,
            error: r.error.as_deref().unwrap_or(""),
        })
        .collect();
    write_csv(&out.join("sweep.csv"), &rows)?;

    #[derive(Serialize)]
    struct Bin<'a> {
        outcome: &'a str,
        lower: f64,
        upper: f64,
        count: usize,
    }
    let edges = SweepResult::bin_edges();
    let mut bins = Vec::new();
    for (o, counts) in &result.histogram {
        for (k, &count) in counts.iter().enumerate() {
            bins.push(Bin {
                outcome: o,
                lower: edges[k],
                upper: edges[k + 1],
                count,
            });
        }
    }
    write_csv(&out.join("histogram.csv"), &bins)
}

pub fn ladder(cfg: &LadderConfig, out: &Path) -> Result<String, CliError> {
    let panel = Panel::read_csv(&cfg.panel)?;
    let steps = if cfg.steps.is_empty() {
        canonical_ladder(&cfg.design)
    } else {
        cfg.steps.clone()
    };
    let rows = covariate_sequencing(&panel, &cfg.design, &steps)?;
    write_csv(&out.join("ladder.csv"), &rows)?;
    let incentive = cfg.design.chain.first().cloned().unwrap_or_default();
    let mut t = TextTable::new(
        &format!("Covariate sequencing: {incentive}, {}-month lag", cfg.design.lag),
        &["Step", "Coefficient", "(SE)", "N", "R2", "AIC", "BIC", "F"],
    );
    for r in &rows {
        t.push(vec![
            r.label.clone(),
            starred(r.coefficient, r.p_value, 3),
            format!("({})", number(r.std_error, 3)),
            number(r.observations as f64, 0),
            number(r.r2, 3),
            number(r.aic, 1),
            number(r.bic, 1),
            number(r.f_stat, 2),
        ]);
    }
    t.notes.push(STAR_NOTE.into());
    let s = t.render();
    write_text(&out.join("ladder.txt"), &s)?;
    Ok(s)
}
