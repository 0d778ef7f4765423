//! Lag / fixed-effect / polynomial sweep of the incentive coefficient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::design::{build_design, DesignSpec, FixedEffects};
use crate::ingest::Panel;
use crate::linalg::ols_fit;

pub const HISTOGRAM_BINS: usize = 20;
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeSet {
    None,
    Annual,
    AnnualSeasonal,
}

impl FeSet {
    pub const ALL: [FeSet; 3] = [FeSet::None, FeSet::Annual, FeSet::AnnualSeasonal];

    pub fn label(&self) -> &'static str {
        match self {
            FeSet::None => "none",
            FeSet::Annual => "annual",
            FeSet::AnnualSeasonal => "annual+seasonal",
        }
    }

    pub fn effects(&self) -> FixedEffects {
        FixedEffects {
            year: !matches!(self, FeSet::None),
            month: matches!(self, FeSet::AnnualSeasonal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    /// Outcome columns; each replaces the last element of the chain, or cuts
    /// the chain at a mediator of the same name.
    pub outcomes: Vec<String>,
}

fn default_max_lag() -> usize {
    36
}

impl SweepGrid {
    pub fn models_per_outcome(&self) -> usize {
        (self.max_lag + 1) * FeSet::ALL.len() * 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub id: usize,
    pub outcome: String,
    pub lag: usize,
    pub fe: FeSet,
    pub polynomial: bool,
    pub coefficient: f64,
    pub p_value: f64,
    /// p-value carrying the sign of the coefficient.
    pub signed_p: f64,
    pub observations: usize,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn positive_significant(&self) -> bool {
        self.error.is_none() && self.coefficient > 0.0 && self.p_value < SIGNIFICANCE
    }

    pub fn significant(&self) -> bool {
        self.error.is_none() && self.p_value < SIGNIFICANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per outcome, counts of signed p-values in equal bins over [-1, 1].
    pub histogram: Vec<(String, Vec<usize>)>,
    pub positive_significant: Vec<(String, usize)>,
}

impl SweepResult {
    pub fn bin_edges() -> Vec<f64> {
        (0..=HISTOGRAM_BINS)
            .map(|k| -1.0 + 2.0 * k as f64 / HISTOGRAM_BINS as f64)
            .collect()
    }
}

fn histogram(values: impl Iterator<Item = f64>) -> Vec<usize> {
    let mut bins = vec![0; HISTOGRAM_BINS];
    for v in values.filter(|v| v.is_finite()) {
        let k = ((v + 1.0) / 2.0 * HISTOGRAM_BINS as f64).floor() as isize;
        bins[k.clamp(0, HISTOGRAM_BINS as isize - 1) as usize] += 1;
    }
    bins
}

/// Fit every (outcome, lag, FE set, polynomial) model. Order is outcome,
/// then lag, then FE set, then polynomial off/on; ids follow that order.
/// Failing models are kept as rows with `error` set.
pub fn sweep(panel: &Panel, spec: &DesignSpec, grid: &SweepGrid) -> Result<SweepResult> {
    if spec.chain.len() < 2 {
        return Err(Error::InvalidInput("the chain needs an incentive and an outcome".into()));
    }
    if grid.outcomes.is_empty() {
        return Err(Error::InvalidInput("the sweep needs at least one outcome".into()));
    }
    if panel.len() <= grid.max_lag {
        return Err(Error::InsufficientHistory(format!(
            "{} months cannot support lag {}",
            panel.len(),
            grid.max_lag
        )));
    }
    let incentive = spec.chain[0].clone();
    let mut cells = Vec::new();
    for outcome in &grid.outcomes {
        for lag in 0..=grid.max_lag {
            for fe in FeSet::ALL {
                for polynomial in [false, true] {
                    cells.push((outcome.clone(), lag, fe, polynomial));
                }
            }
        }
    }
    let rows: Vec<SweepRow> = cells
        .into_par_iter()
        .enumerate()
        .map(|(id, (outcome, lag, fe, polynomial))| {
            let mut s = spec.clone();
            s.lag = lag;
            s.fixed_effects = fe.effects();
            s.polynomial = polynomial;
            match s.chain[1..].iter().position(|c| *c == outcome) {
                Some(k) => s.chain.truncate(k + 2),
                None => *s.chain.last_mut().expect("non-empty chain") = outcome.clone(),
            }
            let fitted = build_design(panel, &s).and_then(|b| {
                let fit = ols_fit(&b.design, b.design.outcome_index())?;
                let e = fit.estimate_by_name(&incentive).expect("incentive in design");
                Ok((e, fit.n))
            });
            let mut row = SweepRow {
                id,
                outcome,
                lag,
                fe,
                polynomial,
                coefficient: f64::NAN,
                p_value: f64::NAN,
                signed_p: f64::NAN,
                observations: 0,
                error: None,
            };
            match fitted {
                Ok((e, n)) => {
                    row.coefficient = e.coef;
                    row.p_value = e.p;
                    row.signed_p = if e.coef < 0.0 { -e.p } else { e.p };
                    row.observations = n;
                }
                Err(err) => row.error = Some(err.to_string()),
            }
            row
        })
        .collect();
    let histogram = grid
        .outcomes
        .iter()
        .map(|o| (o.clone(), histogram(rows.iter().filter(|r| &r.outcome == o).map(|r| r.signed_p))))
        .collect();
    let positive_significant = grid
        .outcomes
        .iter()
        .map(|o| (o.clone(), rows.iter().filter(|r| &r.outcome == o && r.positive_significant()).count()))
        .collect();
    Ok(SweepResult {
        rows,
        histogram,
        positive_significant,
    })
}
