//! Turning a monthly panel into a lagged, grouped regression design for the
//! structural system.

use serde::{Deserialize, Serialize};

use super::panel::Panel;
use super::Month;
use crate::error::{Error, Result};
use crate::gsls::{CausalOrdering, VariableGroup};
use crate::linalg::OrderedDesign;

pub const DEFAULT_LAG: usize = 12;
pub const MAX_LAG: usize = 36;
/// Group labels of the year and month dummies.
pub const FIXED_EFFECTS: &str = "fixed effects";
pub const SEASONAL_EFFECTS: &str = "seasonal effects";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    /// Trailing rolling-mean window in months; partial windows at the start
    /// of the panel average what is available.
    #[serde(default)]
    pub rolling: Option<usize>,
    /// Also emit `<name>_sq` (squared before rolling) when the polynomial
    /// option is on.
    #[serde(default)]
    pub polynomial: bool,
}

impl ColumnSpec {
    pub fn plain(name: &str) -> Self {
        Self {
            name: name.to_string(),
            rolling: None,
            polynomial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlGroup {
    pub label: String,
    pub columns: Vec<ColumnSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedEffects {
    #[serde(default)]
    pub year: bool,
    #[serde(default)]
    pub month: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default)]
    pub fixed_effects: FixedEffects,
    pub controls: Vec<ControlGroup>,
    /// Endogenous chain; all but the last (the outcome) are lagged.
    pub chain: Vec<String>,
    #[serde(default)]
    pub polynomial: bool,
    /// Rows whose lagged source month is listed here are dropped.
    #[serde(default)]
    pub exclude_source_months: Vec<Month>,
}

fn default_lag() -> usize {
    DEFAULT_LAG
}

#[derive(Debug, Clone)]
pub struct BuiltDesign {
    pub design: OrderedDesign,
    pub ordering: CausalOrdering,
    /// Outcome month of each row.
    pub months: Vec<Month>,
    pub dropped_missing: usize,
    pub dropped_excluded: usize,
}

/// Trailing mean over up to `window` values ending at each position,
/// skipping missing values.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(w);
            let present: Vec<f64> = values[start..=i].iter().copied().filter(|x| !x.is_nan()).collect();
            crate::stats::mean(&present)
        })
        .collect()
}

pub fn build_design(panel: &Panel, spec: &DesignSpec) -> Result<BuiltDesign> {
    if spec.lag > MAX_LAG {
        return Err(Error::InvalidInput(format!("lag {} exceeds the maximum of {MAX_LAG}", spec.lag)));
    }
    if spec.chain.is_empty() {
        return Err(Error::InvalidInput("the chain needs at least an outcome".into()));
    }
    let t_len = panel.len();
    let lag = spec.lag;

    // (name, group label, series aligned to the panel, lagged?)
    let mut series: Vec<(String, usize, Vec<f64>, bool)> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for group in &spec.controls {
        let g = labels.len();
        labels.push(group.label.clone());
        for col in &group.columns {
            let raw = panel.column(&col.name)?;
            let roll = |v: Vec<f64>| match col.rolling {
                Some(w) => rolling_mean(&v, w),
                None => v,
            };
            series.push((col.name.clone(), g, roll(raw.to_vec()), true));
            if spec.polynomial && col.polynomial {
                let sq = raw.iter().map(|x| x * x).collect();
                series.push((format!("{}_sq", col.name), g, roll(sq), true));
            }
        }
    }
    let last = spec.chain.len() - 1;
    for (k, name) in spec.chain.iter().enumerate() {
        labels.push(name.clone());
        series.push((name.clone(), labels.len() - 1, panel.column(name)?.to_vec(), k < last));
    }

    let mut rows = Vec::new();
    let mut dropped_missing = 0;
    let mut dropped_excluded = 0;
    for t in lag..t_len {
        let s = t - lag;
        if spec.exclude_source_months.contains(&panel.months()[s]) {
            dropped_excluded += 1;
            continue;
        }
        let missing = series
            .iter()
            .any(|(_, _, v, lagged)| v[if *lagged { s } else { t }].is_nan());
        if missing {
            dropped_missing += 1;
            continue;
        }
        rows.push(t);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientHistory(format!(
            "{t_len} months leave no usable rows at lag {lag}"
        )));
    }
    let months: Vec<Month> = rows.iter().map(|&t| panel.months()[t]).collect();

    let mut columns: Vec<(String, usize, Vec<f64>)> = Vec::new();
    let mut groups: Vec<VariableGroup> = Vec::new();
    let effects: [(bool, &str, &str, fn(&Month) -> u32); 2] = [
        (spec.fixed_effects.year, FIXED_EFFECTS, "year", |m| m.year as u32),
        (spec.fixed_effects.month, SEASONAL_EFFECTS, "month", |m| m.month),
    ];
    for (on, label, prefix, of) in effects {
        if !on {
            continue;
        }
        let mut levels: Vec<u32> = months.iter().map(of).collect();
        levels.sort_unstable();
        levels.dedup();
        let mut members = Vec::new();
        for level in levels.into_iter().skip(1) {
            let name = format!("{prefix}_{level}");
            let v = months.iter().map(|m| if of(m) == level { 1.0 } else { 0.0 }).collect();
            columns.push((name.clone(), groups.len(), v));
            members.push(name);
        }
        if !members.is_empty() {
            groups.push(VariableGroup {
                label: label.to_string(),
                members,
            });
        }
    }
    let offset = groups.len();
    let n_controls = spec.controls.len();
    for (g, label) in labels.iter().enumerate().take(n_controls) {
        let members: Vec<String> = series.iter().filter(|s| s.1 == g).map(|s| s.0.clone()).collect();
        if !members.is_empty() {
            groups.push(VariableGroup {
                label: label.clone(),
                members,
            });
        }
    }
    for (name, g, v, lagged) in &series {
        let vals = rows.iter().map(|&t| v[if *lagged { t - lag } else { t }]).collect();
        columns.push((name.clone(), g + offset, vals));
    }
    let design = OrderedDesign::from_columns(columns, true)?;
    let ordering = CausalOrdering {
        groups,
        chain: spec.chain.clone(),
    };
    ordering.validate(&design)?;
    Ok(BuiltDesign {
        design,
        ordering,
        months,
        dropped_missing,
        dropped_excluded,
    })
}
