//! Interval-level underbidding regression: the energy price on an
//! incentive-active indicator (fixed offset) and the incentive payment
//! (proportional offset) plus market, climate and capacity controls.

use chrono::{Datelike, Duration, Timelike};
use serde::{Deserialize, Serialize};

use super::{keep_mask, Filter};
use crate::error::{Error, Result};
use crate::gsls::{estimate_direct, estimate_total_gsls, EffectsTable};
use crate::ingest::intervals::GRID_MINUTES;
use crate::ingest::IntervalTable;
use crate::linalg::{ols_fit, Estimate, FitResult, OrderedDesign};

pub const ACTIVE: &str = "incentive_active";
pub const PAYMENT: &str = "incentive_payment";

/// One lagged residual, fifteen minutes back.
pub const AR1_HORIZONS: [usize; 1] = [1];
/// Five intraday lags and five daily lags, in intervals.
pub const AR10_HORIZONS: [usize; 10] = [1, 2, 3, 4, 5, 96, 192, 288, 384, 480];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalFixedEffects {
    #[serde(default)]
    pub year: bool,
    #[serde(default)]
    pub month: bool,
    #[serde(default)]
    pub hour: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalGroup {
    pub label: String,
    pub columns: Vec<String>,
}

impl IntervalGroup {
    fn new(label: &str, columns: &[&str]) -> Self {
        Self {
            label: label.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnderbidSpec {
    #[serde(default = "default_outcome")]
    pub outcome: String,
    #[serde(default = "default_incentive")]
    pub incentive: String,
    #[serde(default = "default_fe")]
    pub fixed_effects: IntervalFixedEffects,
    #[serde(default = "default_groups")]
    pub groups: Vec<IntervalGroup>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    /// Lagged-residual horizons in intervals; empty for plain OLS.
    #[serde(default)]
    pub ar_horizons: Vec<usize>,
    /// Control group after which the lagged residuals enter the ordering;
    /// after all controls when unset or absent.
    #[serde(default = "default_ar_after")]
    pub ar_after: Option<String>,
}

fn default_outcome() -> String {
    "energy_price".into()
}
fn default_incentive() -> String {
    "incentive".into()
}
fn default_fe() -> IntervalFixedEffects {
    IntervalFixedEffects {
        year: true,
        month: true,
        hour: false,
    }
}
fn default_ar_after() -> Option<String> {
    Some("gas price".into())
}
fn default_groups() -> Vec<IntervalGroup> {
    vec![
        IntervalGroup::new("capacities", &["capacity_ng", "capacity_renewables", "capacity_other"]),
        IntervalGroup::new("climate", &["temperature", "temperature_sq", "wind_speed"]),
        IntervalGroup::new("gas price", &["gas_price"]),
        IntervalGroup::new(
            "market",
            &["supply_ng", "supply_renewables", "supply_other", "reserves", "capacity_utilization"],
        ),
    ]
}

impl Default for UnderbidSpec {
    fn default() -> Self {
        Self {
            outcome: default_outcome(),
            incentive: default_incentive(),
            fixed_effects: default_fe(),
            groups: default_groups(),
            filters: Vec::new(),
            ar_horizons: Vec::new(),
            ar_after: default_ar_after(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnderbidResult {
    pub direct: FitResult,
    pub total: FitResult,
    pub table: EffectsTable,
    pub active: Estimate,
    pub payment: Estimate,
    pub active_total: Estimate,
    pub payment_total: Estimate,
    pub mean_active_incentive: f64,
    /// Fixed plus proportional offset at the mean active incentive.
    pub combined_direct: f64,
    pub combined_total: f64,
    /// (horizon in intervals, direct estimate of the lagged residual).
    pub ar_terms: Vec<(usize, Estimate)>,
    /// Largest |cosine| between stage-2 residuals and lagged-residual regressors.
    pub ar_orthogonality: f64,
    pub observations: usize,
    pub dropped_by_filters: usize,
    pub dropped_missing: usize,
    pub dropped_for_lags: usize,
}

/// Display name of a lagged-residual regressor.
pub fn ar_name(h: usize) -> String {
    let minutes = h as i64 * GRID_MINUTES;
    if minutes % (24 * 60) == 0 {
        format!("ar_error_{}h", minutes / 60)
    } else {
        format!("ar_error_{minutes}min")
    }
}

struct Built {
    design: OrderedDesign,
    rows: Vec<usize>,
}

/// Assemble the ordered interval design over `rows`, optionally with an extra
/// lagged-residual group.
fn interval_design(
    table: &IntervalTable,
    spec: &UnderbidSpec,
    rows: &[usize],
    extra: Option<&[(String, Vec<f64>)]>,
) -> Result<Built> {
    let y = table.column(&spec.outcome)?;
    let inc = table.column(&spec.incentive)?;
    let controls: Vec<Vec<(&str, &[f64])>> = spec
        .groups
        .iter()
        .map(|g| g.columns.iter().map(|c| Ok((c.as_str(), table.column(c)?))).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let usable: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| !y[r].is_nan() && !inc[r].is_nan() && controls.iter().flatten().all(|(_, c)| !c[r].is_nan()))
        .collect();
    let keep_extra: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| usable.binary_search(r).is_ok())
        .map(|(k, _)| k)
        .collect();
    if usable.is_empty() {
        return Err(Error::EmptySample("no complete intervals for the underbidding design".into()));
    }

    let ts = table.timestamps();
    let mut cols: Vec<(String, usize, Vec<f64>)> = Vec::new();
    let mut group = 0;
    let fe: [(bool, &str, fn(&chrono::NaiveDateTime) -> u32); 3] = [
        (spec.fixed_effects.year, "year", |t| t.year() as u32),
        (spec.fixed_effects.month, "month", |t| t.month()),
        (spec.fixed_effects.hour, "hour", |t| t.hour()),
    ];
    for (on, prefix, of) in fe {
        if !on {
            continue;
        }
        let mut levels: Vec<u32> = usable.iter().map(|&r| of(&ts[r])).collect();
        levels.sort_unstable();
        levels.dedup();
        for level in levels.into_iter().skip(1) {
            let v = usable.iter().map(|&r| if of(&ts[r]) == level { 1.0 } else { 0.0 }).collect();
            cols.push((format!("{prefix}_{level}"), group, v));
        }
        group += 1;
    }
    let ar_slot = spec
        .ar_after
        .as_ref()
        .and_then(|l| spec.groups.iter().position(|g| &g.label == l))
        .unwrap_or(spec.groups.len().saturating_sub(1));
    let push_extra = |cols: &mut Vec<(String, usize, Vec<f64>)>, group: &mut usize| {
        if let Some(extra) = extra {
            for (name, v) in extra {
                cols.push((name.clone(), *group, keep_extra.iter().map(|&k| v[k]).collect()));
            }
            *group += 1;
        }
    };
    if spec.groups.is_empty() {
        push_extra(&mut cols, &mut group);
    }
    for (g, members) in controls.iter().enumerate() {
        for (name, c) in members {
            cols.push((name.to_string(), group, usable.iter().map(|&r| c[r]).collect()));
        }
        group += 1;
        if g == ar_slot {
            push_extra(&mut cols, &mut group);
        }
    }
    cols.push((
        ACTIVE.into(),
        group,
        usable.iter().map(|&r| if inc[r] > 0.0 { 1.0 } else { 0.0 }).collect(),
    ));
    cols.push((PAYMENT.into(), group + 1, usable.iter().map(|&r| inc[r]).collect()));
    cols.push((spec.outcome.clone(), group + 2, usable.iter().map(|&r| y[r]).collect()));
    Ok(Built {
        design: OrderedDesign::from_columns(cols, true)?,
        rows: usable,
    })
}

/// Direct effects by OLS and total effects by GSLS for the price equation.
pub fn underbid_fit(table: &IntervalTable, spec: &UnderbidSpec) -> Result<UnderbidResult> {
    if !spec.ar_horizons.is_empty() {
        return ar_gls_fit(table, spec);
    }
    let (rows, dropped) = filtered_rows(table, spec)?;
    let built = interval_design(table, spec, &rows, None)?;
    finish(table, spec, built, dropped, rows.len(), 0, Vec::new())
}

/// Two-stage lagged-residual regression: stage 1 OLS, then a single refit
/// with the stage-1 residuals at each horizon as extra regressors. Rows whose
/// lagged timestamps are not in the stage-1 sample are dropped.
pub fn ar_gls_fit(table: &IntervalTable, spec: &UnderbidSpec) -> Result<UnderbidResult> {
    if spec.ar_horizons.is_empty() || spec.ar_horizons.contains(&0) {
        return Err(Error::InvalidInput("lagged-residual horizons must be positive".into()));
    }
    let (rows, dropped) = filtered_rows(table, spec)?;
    let stage1 = interval_design(table, spec, &rows, None)?;
    let fit1 = ols_fit(&stage1.design, stage1.design.outcome_index())?;
    let ts = table.timestamps();
    let residual_at: std::collections::HashMap<_, f64> = stage1
        .rows
        .iter()
        .zip(fit1.residuals.iter())
        .map(|(&r, &e)| (ts[r], e))
        .collect();

    let mut kept = Vec::new();
    let mut lagged: Vec<Vec<f64>> = vec![Vec::new(); spec.ar_horizons.len()];
    for &r in &stage1.rows {
        let values: Option<Vec<f64>> = spec
            .ar_horizons
            .iter()
            .map(|&h| residual_at.get(&(ts[r] - Duration::minutes(h as i64 * GRID_MINUTES))).copied())
            .collect();
        if let Some(v) = values {
            kept.push(r);
            for (col, x) in lagged.iter_mut().zip(v) {
                col.push(x);
            }
        }
    }
    if kept.is_empty() {
        let h = spec.ar_horizons.iter().max().copied().unwrap_or(0);
        return Err(Error::InsufficientHistory(format!(
            "no interval has stage-1 residuals {h} steps back"
        )));
    }
    let dropped_for_lags = stage1.rows.len() - kept.len();
    let extra: Vec<(String, Vec<f64>)> = spec.ar_horizons.iter().map(|&h| ar_name(h)).zip(lagged).collect();
    let built = interval_design(table, spec, &kept, Some(&extra))?;
    let names = extra.iter().map(|e| e.0.clone()).collect();
    finish(table, spec, built, dropped, rows.len(), dropped_for_lags, names)
}

fn filtered_rows(table: &IntervalTable, spec: &UnderbidSpec) -> Result<(Vec<usize>, usize)> {
    let keep = keep_mask(table, &spec.filters, &spec.outcome, &spec.incentive)?;
    let rows: Vec<usize> = (0..table.len()).filter(|&r| keep[r]).collect();
    let dropped = table.len() - rows.len();
    Ok((rows, dropped))
}

fn finish(
    table: &IntervalTable,
    spec: &UnderbidSpec,
    built: Built,
    dropped_by_filters: usize,
    after_filters: usize,
    dropped_for_lags: usize,
    ar_names: Vec<String>,
) -> Result<UnderbidResult> {
    let d = &built.design;
    let y = d.outcome_index();
    let direct = estimate_direct(d, &[y])?;
    let total = estimate_total_gsls(d, &[y])?;
    let table_fx = EffectsTable::from_fits(&direct, &total, &[y])?;
    let direct_fit = direct.equations[0].fit.clone();
    let total_fit = total.equations[0].fit.clone();
    let est = |fit: &FitResult, name: &str| {
        fit.estimate_by_name(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let active = est(&direct_fit, ACTIVE)?;
    let payment = est(&direct_fit, PAYMENT)?;
    let active_total = est(&total_fit, ACTIVE)?;
    let payment_total = est(&total_fit, PAYMENT)?;
    let inc = table.column(&spec.incentive)?;
    let on: Vec<f64> = built.rows.iter().map(|&r| inc[r]).filter(|&x| x > 0.0).collect();
    let mean_active = crate::stats::mean(&on);

    let mut ar_terms = Vec::new();
    let mut ortho: f64 = 0.0;
    for (h, name) in spec.ar_horizons.iter().zip(&ar_names) {
        ar_terms.push((*h, est(&direct_fit, name)?));
        let j = d.index_of(name).expect("added above");
        let x = d.column(j);
        let cos = direct_fit.residuals.dot(&x) / (direct_fit.residuals.norm() * x.norm());
        ortho = ortho.max(cos.abs());
    }
    Ok(UnderbidResult {
        active,
        payment,
        active_total,
        payment_total,
        mean_active_incentive: mean_active,
        combined_direct: active.coef + payment.coef * mean_active,
        combined_total: active_total.coef + payment_total.coef * mean_active,
        ar_terms,
        ar_orthogonality: ortho,
        observations: direct_fit.n,
        dropped_by_filters,
        dropped_missing: after_filters - built.rows.len() - dropped_for_lags,
        dropped_for_lags,
        direct: direct_fit,
        total: total_fit,
        table: table_fx,
    })
}
