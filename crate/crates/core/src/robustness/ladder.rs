//! Covariate sequencing: the incentive coefficient as covariate groups are
//! added one at a time and extreme months are dropped.

use serde::{Deserialize, Serialize};

use super::Filter;
use crate::error::{Error, Result};
use crate::gsls::stars;
use crate::ingest::design::{build_design, DesignSpec, FixedEffects, FIXED_EFFECTS, SEASONAL_EFFECTS};
use crate::ingest::Panel;
use crate::linalg::ols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderStep {
    pub label: String,
    /// Group labels included at this step (chain variables by name).
    pub groups: Vec<String>,
    #[serde(default)]
    pub exclude_storm_uri: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub label: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub stars: String,
    pub observations: usize,
    pub r2: f64,
    pub aic: f64,
    pub bic: f64,
    pub f_stat: f64,
}

/// Cumulative steps over year effects, month effects and each control group
/// in order; intermediate chain variables join with the last control group.
/// A final step repeats the full set without the storm month.
pub fn canonical_ladder(spec: &DesignSpec) -> Vec<LadderStep> {
    let mut labels = vec![FIXED_EFFECTS.to_string(), SEASONAL_EFFECTS.to_string()];
    labels.extend(spec.controls.iter().map(|g| g.label.clone()));
    let mediators: Vec<String> = spec
        .chain
        .iter()
        .skip(1)
        .take(spec.chain.len().saturating_sub(2))
        .cloned()
        .collect();
    let mut steps = Vec::new();
    let mut included: Vec<String> = Vec::new();
    for (k, label) in labels.iter().enumerate() {
        included.push(label.clone());
        if k == labels.len() - 1 {
            included.extend(mediators.iter().cloned());
        }
        steps.push(LadderStep {
            label: label.clone(),
            groups: included.clone(),
            exclude_storm_uri: false,
        });
    }
    steps.push(LadderStep {
        label: "exclude storm".into(),
        groups: included,
        exclude_storm_uri: true,
    });
    steps
}

/// Fit the outcome on the incentive (the first chain variable) plus each
/// step's groups, with year and month effects available to every step.
pub fn covariate_sequencing(panel: &Panel, spec: &DesignSpec, steps: &[LadderStep]) -> Result<Vec<LadderRow>> {
    let incentive = spec
        .chain
        .first()
        .ok_or_else(|| Error::InvalidInput("the chain needs an incentive and an outcome".into()))?;
    if spec.chain.len() < 2 {
        return Err(Error::InvalidInput("the chain needs an incentive and an outcome".into()));
    }
    steps
        .iter()
        .map(|step| {
            let mut s = spec.clone();
            s.fixed_effects = FixedEffects { year: true, month: true };
            if step.exclude_storm_uri {
                s.exclude_source_months.push(Filter::storm_uri_month());
            }
            let built = build_design(panel, &s)?;
            let d = &built.design;
            let mut cols = vec![0];
            for label in &step.groups {
                if let Some(g) = built.ordering.all_groups().iter().find(|g| &g.label == label) {
                    for m in &g.members {
                        cols.push(d.index_of(m).expect("ordering matches design"));
                    }
                } else if label != FIXED_EFFECTS && label != SEASONAL_EFFECTS {
                    // dummy groups vanish when a single level remains
                    return Err(Error::InvalidInput(format!("ladder step `{}` names unknown group `{label}`", step.label)));
                }
            }
            let inc = d.index_of(incentive).expect("chain column");
            if !cols.contains(&inc) {
                cols.push(inc);
            }
            cols.sort_unstable();
            cols.dedup();
            let x = d.data().select_columns(cols.iter());
            let names: Vec<String> = cols.iter().map(|&c| d.name(c).to_string()).collect();
            let fit = ols(&x, &d.column(d.outcome_index()), &names, true)?;
            let e = fit.estimate_by_name(incentive).expect("incentive included");
            Ok(LadderRow {
                label: step.label.clone(),
                coefficient: e.coef,
                std_error: e.se,
                p_value: e.p,
                stars: stars(e.p).to_string(),
                observations: fit.n,
                r2: fit.r2,
                aic: fit.aic,
                bic: fit.bic,
                f_stat: fit.f_stat,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::design::{ColumnSpec, ControlGroup};
    use crate::ingest::Month;

    fn panel() -> Panel {
        let m0 = Month::new(2015, 7).unwrap();
        let n = 90;
        let mut p = Panel::new((0..n as i64).map(|k| m0.offset(k)).collect());
        let f = |a: f64, b: f64| (0..n).map(|i| a * (i as f64 * b).sin() + (i as f64 * 0.7).cos()).collect::<Vec<_>>();
        p.insert("temp", f(3.0, 0.5)).unwrap();
        p.insert("cpi", f(1.0, 1.3)).unwrap();
        p.insert("incentive", f(2.0, 0.7)).unwrap();
        p.insert("pool", f(5.0, 0.3)).unwrap();
        p.insert("gen", f(7.0, 0.2)).unwrap();
        p
    }

    fn spec() -> DesignSpec {
        DesignSpec {
            lag: 12,
            fixed_effects: FixedEffects::default(),
            controls: vec![
                ControlGroup {
                    label: "climatic".into(),
                    columns: vec![ColumnSpec::plain("temp")],
                },
                ControlGroup {
                    label: "economic".into(),
                    columns: vec![ColumnSpec::plain("cpi")],
                },
            ],
            chain: vec!["incentive".into(), "pool".into(), "gen".into()],
            polynomial: false,
            exclude_source_months: vec![],
        }
    }

    #[test]
    fn ladder_shape_and_storm_exclusion() {
        let s = spec();
        let steps = canonical_ladder(&s);
        assert_eq!(steps.len(), 5);
        assert!(steps[3].groups.contains(&"pool".to_string()));
        let rows = covariate_sequencing(&panel(), &s, &steps).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0].observations, 78);
        assert_eq!(rows[4].observations, 77);
    }

    #[test]
    fn single_step_is_plain_fixed_effects_fit() {
        let s = spec();
        let steps = &canonical_ladder(&s)[..1];
        let row = &covariate_sequencing(&panel(), &s, steps).unwrap()[0];
        let mut fe_only = s.clone();
        fe_only.fixed_effects = FixedEffects { year: true, month: false };
        fe_only.controls.clear();
        fe_only.chain = vec!["incentive".into(), "gen".into()];
        let b = build_design(&panel(), &fe_only).unwrap();
        let fit = crate::linalg::ols_fit(&b.design, b.design.outcome_index()).unwrap();
        assert!((fit.estimate_by_name("incentive").unwrap().coef - row.coefficient).abs() < 1e-9);
    }

    #[test]
    fn unknown_group_is_rejected() {
        let s = spec();
        let steps = vec![LadderStep {
            label: "bad".into(),
            groups: vec!["nope".into()],
            exclude_storm_uri: false,
        }];
        assert!(covariate_sequencing(&panel(), &s, &steps).is_err());
    }
}
