//! Recursive structural systems: equation-by-equation OLS for direct effects,
//! Gram-Schmidt least squares (GSLS) for total effects, and the recursion
//! linking the two.
//!
//! Every non-intercept column of an [`OrderedDesign`] has its own equation,
//! regressed on all columns of strictly earlier groups. Direct effects come
//! from those regressions on the original columns. Total effects come from the
//! same regressions after each earlier column is replaced by its
//! Gram-Schmidt residual, which makes cross-group regressors orthogonal.

pub mod diagnostics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt_residualize, ols, ols_on, Estimate, FitResult, OrderedDesign};

/// Tolerance for the in-sample agreement between GSLS totals and totals
/// implied by the direct-effect recursion, relative to `max(1, |total|)`.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

/// A named block of variables determined at the same causal stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableGroup {
    pub label: String,
    pub members: Vec<String>,
}

/// Causal order of variable groups plus the endogenous chain (e.g. incentive,
/// applicant pool, generating capacity). The last chain variable is the
/// outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalOrdering {
    pub groups: Vec<VariableGroup>,
    pub chain: Vec<String>,
}

impl CausalOrdering {
    /// The groups followed by one singleton group per chain variable.
    pub fn all_groups(&self) -> Vec<VariableGroup> {
        self.groups
            .iter()
            .cloned()
            .chain(self.chain.iter().map(|c| VariableGroup {
                label: c.clone(),
                members: vec![c.clone()],
            }))
            .collect()
    }

    /// Check that every non-intercept design column belongs to exactly one
    /// group, that the design's group boundaries agree, and that chain
    /// variables are singletons in order at the end.
    pub fn validate(&self, design: &OrderedDesign) -> Result<()> {
        if self.chain.is_empty() {
            return Err(Error::InvalidDesign("the ordering needs at least an outcome".into()));
        }
        let groups = self.all_groups();
        let first = usize::from(design.has_intercept());
        let mut membership = vec![None; design.ncols()];
        for (g, group) in groups.iter().enumerate() {
            for m in &group.members {
                let j = design
                    .index_of(m)
                    .ok_or_else(|| Error::InvalidDesign(format!("ordering names unknown column `{m}`")))?;
                if membership[j].is_some() {
                    return Err(Error::InvalidDesign(format!("column `{m}` belongs to two groups")));
                }
                membership[j] = Some(g);
            }
        }
        for j in first..design.ncols() {
            let Some(g) = membership[j] else {
                return Err(Error::InvalidDesign(format!(
                    "column `{}` is not in the ordering",
                    design.name(j)
                )));
            };
            for i in first..j {
                let h = membership[i].expect("checked above");
                if h > g {
                    return Err(Error::InvalidDesign(format!(
                        "column `{}` precedes `{}` but comes later in the ordering",
                        design.name(i),
                        design.name(j)
                    )));
                }
                if (h == g) != (design.groups()[i] == design.groups()[j]) {
                    return Err(Error::InvalidDesign(format!(
                        "design groups disagree with the ordering at `{}`",
                        design.name(j)
                    )));
                }
            }
        }
        let tail = &design.names()[design.ncols() - self.chain.len()..];
        if tail != self.chain.as_slice() {
            return Err(Error::InvalidDesign("chain variables must be the last design columns".into()));
        }
        Ok(())
    }

    pub fn chain_indices(&self, design: &OrderedDesign) -> Result<Vec<usize>> {
        self.chain
            .iter()
            .map(|c| design.index_of(c).ok_or_else(|| Error::MissingColumn(c.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Direct,
    Total,
}

#[derive(Debug, Clone)]
pub struct EquationFit {
    pub outcome: usize,
    pub regressors: Vec<usize>,
    pub fit: FitResult,
}

impl EquationFit {
    pub fn coefficient_of(&self, cause: usize) -> Option<f64> {
        self.regressors
            .iter()
            .position(|&r| r == cause)
            .map(|k| self.fit.coefficients[k])
    }

    pub fn estimate_of(&self, cause: usize) -> Option<Estimate> {
        self.regressors
            .iter()
            .position(|&r| r == cause)
            .map(|k| self.fit.estimate(k))
    }
}

/// Fitted equations of one system, direct or total.
#[derive(Debug, Clone)]
pub struct SystemFit {
    pub kind: EffectKind,
    pub names: Vec<String>,
    pub groups: Vec<usize>,
    pub equations: Vec<EquationFit>,
}

impl SystemFit {
    pub fn equation(&self, outcome: usize) -> Option<&EquationFit> {
        self.equations.iter().find(|e| e.outcome == outcome)
    }

    pub fn coefficient(&self, cause: usize, outcome: usize) -> Option<f64> {
        self.equation(outcome)?.coefficient_of(cause)
    }
}

/// Every column that has at least one earlier-group regressor.
pub fn all_equations(design: &OrderedDesign) -> Vec<usize> {
    (0..design.ncols())
        .filter(|&j| !design.earlier_columns(j).is_empty())
        .collect()
}

/// Direct effects: each listed column regressed on all earlier-group columns
/// in their original form.
pub fn estimate_direct(design: &OrderedDesign, outcomes: &[usize]) -> Result<SystemFit> {
    let equations = outcomes
        .iter()
        .map(|&j| {
            let regressors = design.earlier_columns(j);
            let fit = ols_on(design, j, &regressors)?;
            Ok(EquationFit {
                outcome: j,
                regressors,
                fit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SystemFit {
        kind: EffectKind::Direct,
        names: design.names().to_vec(),
        groups: design.groups().to_vec(),
        equations,
    })
}

/// Total effects by GSLS: each listed column (in original form) regressed on
/// the Gram-Schmidt residuals of all earlier-group columns.
pub fn estimate_total_gsls(design: &OrderedDesign, outcomes: &[usize]) -> Result<SystemFit> {
    let residualized = gram_schmidt_residualize(design)?;
    estimate_total_on(design, &residualized, outcomes)
}

/// GSLS fits against an already residualized copy of `design`.
pub fn estimate_total_on(
    design: &OrderedDesign,
    residualized: &OrderedDesign,
    outcomes: &[usize],
) -> Result<SystemFit> {
    let equations = outcomes
        .iter()
        .map(|&j| {
            let regressors = design.earlier_columns(j);
            // the dependent column keeps its original values
            let x = residualized.data().select_columns(regressors.iter());
            let y = design.column(j);
            let names: Vec<String> = regressors.iter().map(|&r| design.name(r).to_string()).collect();
            let intercept = design.has_intercept() && regressors.first() == Some(&0);
            let fit = ols(&x, &y, &names, intercept)?;
            Ok(EquationFit {
                outcome: j,
                regressors,
                fit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SystemFit {
        kind: EffectKind::Total,
        names: design.names().to_vec(),
        groups: design.groups().to_vec(),
        equations,
    })
}

/// Total effects implied by a direct-effect table through
/// `a_ij = b_ij + sum_n a_in b_nj`, the sum running over columns `n` whose
/// group lies strictly between the groups of `i` and `j`.
#[derive(Debug, Clone)]
pub struct ImpliedTotals {
    pub names: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

impl ImpliedTotals {
    pub fn get(&self, cause: usize, outcome: usize) -> Option<f64> {
        self.values.get(outcome)?.get(cause).copied().flatten()
    }
}

pub fn decompose_total(direct: &SystemFit, outcomes: &[usize]) -> Result<ImpliedTotals> {
    let k = direct.names.len();
    let mut values: Vec<Vec<Option<f64>>> = vec![vec![None; k]; k];
    let mut computed = vec![false; k];

    // memoized depth-first evaluation of every row an outcome depends on
    fn row(
        j: usize,
        cause: usize,
        direct: &SystemFit,
        values: &mut [Vec<Option<f64>>],
        computed: &mut [bool],
    ) -> Result<()> {
        if computed[j] {
            return Ok(());
        }
        let groups = &direct.groups;
        let eq = direct.equation(j).ok_or_else(|| Error::IncompleteTable {
            cause: direct.names[cause].clone(),
            outcome: direct.names[j].clone(),
        })?;
        for &n in &eq.regressors {
            if let Some(&first) = eq.regressors.iter().find(|&&i| groups[i] < groups[n]) {
                row(n, first, direct, values, computed)?;
            }
        }
        for &i in &eq.regressors {
            let mut total = eq.coefficient_of(i).expect("regressor of its own equation");
            for (k, &n) in eq.regressors.iter().enumerate() {
                if groups[n] > groups[i] {
                    total += values[n][i].expect("computed above") * eq.fit.coefficients[k];
                }
            }
            values[j][i] = Some(total);
        }
        computed[j] = true;
        Ok(())
    }

    for &j in outcomes {
        row(j, j, direct, &mut values, &mut computed)?;
    }
    Ok(ImpliedTotals {
        names: direct.names.clone(),
        values,
    })
}

/// Largest disagreement between GSLS totals and recursion-implied totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub max_abs_diff: f64,
    pub max_scaled_diff: f64,
    pub passed: bool,
}

pub fn check_total_identity(implied: &ImpliedTotals, total: &SystemFit) -> IdentityCheck {
    let mut max_abs: f64 = 0.0;
    let mut max_scaled: f64 = 0.0;
    for eq in &total.equations {
        for (k, &i) in eq.regressors.iter().enumerate() {
            let gsls = eq.fit.coefficients[k];
            let Some(rec) = implied.get(i, eq.outcome) else {
                continue;
            };
            let d = (gsls - rec).abs();
            max_abs = max_abs.max(d);
            max_scaled = max_scaled.max(d / gsls.abs().max(1.0));
        }
    }
    IdentityCheck {
        max_abs_diff: max_abs,
        max_scaled_diff: max_scaled,
        passed: max_scaled <= IDENTITY_TOLERANCE,
    }
}

/// Significance stars at p < 0.05, 0.01, 0.001 (strict inequalities).
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub cause: String,
    pub direct: Option<Estimate>,
    pub total: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsEquation {
    pub outcome: String,
    pub rows: Vec<EffectRow>,
    pub observations: usize,
    pub r2_direct: f64,
    pub adj_r2_direct: f64,
    pub r2_total: f64,
    pub adj_r2_total: f64,
}

/// Side-by-side direct and total effects per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsTable {
    pub equations: Vec<EffectsEquation>,
}

impl EffectsTable {
    pub fn from_fits(direct: &SystemFit, total: &SystemFit, outcomes: &[usize]) -> Result<Self> {
        let equations = outcomes
            .iter()
            .map(|&j| {
                let d = direct.equation(j).ok_or_else(|| Error::IncompleteTable {
                    cause: String::new(),
                    outcome: direct.names[j].clone(),
                })?;
                let t = total.equation(j).ok_or_else(|| Error::IncompleteTable {
                    cause: String::new(),
                    outcome: total.names[j].clone(),
                })?;
                let rows = d
                    .regressors
                    .iter()
                    .map(|&i| EffectRow {
                        cause: direct.names[i].clone(),
                        direct: d.estimate_of(i),
                        total: t.estimate_of(i),
                    })
                    .collect();
                Ok(EffectsEquation {
                    outcome: direct.names[j].clone(),
                    rows,
                    observations: d.fit.n,
                    r2_direct: d.fit.r2,
                    adj_r2_direct: d.fit.adj_r2,
                    r2_total: t.fit.r2,
                    adj_r2_total: t.fit.adj_r2,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { equations })
    }

    pub fn equation(&self, outcome: &str) -> Option<&EffectsEquation> {
        self.equations.iter().find(|e| e.outcome == outcome)
    }

    pub fn get(&self, cause: &str, outcome: &str) -> Option<&EffectRow> {
        self.equation(outcome)?.rows.iter().find(|r| r.cause == cause)
    }
}

/// Full structural estimation: direct and GSLS total fits for the chain
/// equations, plus the in-sample identity check between them.
#[derive(Debug, Clone)]
pub struct SystemEstimate {
    pub direct: SystemFit,
    pub total: SystemFit,
    pub table: EffectsTable,
    pub identity: IdentityCheck,
}

pub fn estimate_system(design: &OrderedDesign, ordering: &CausalOrdering) -> Result<SystemEstimate> {
    ordering.validate(design)?;
    let chain = ordering.chain_indices(design)?;
    // the recursion needs every intermediate equation, not just the chain
    let direct = estimate_direct(design, &all_equations(design))?;
    let total = estimate_total_gsls(design, &chain)?;
    let implied = decompose_total(&direct, &chain)?;
    let identity = check_total_identity(&implied, &total);
    let table = EffectsTable::from_fits(&direct, &total, &chain)?;
    Ok(SystemEstimate {
        direct,
        total,
        table,
        identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ols_fit;

    /// Chain fixture: x -> i -> a -> g with small deterministic noise.
    fn chain_design() -> OrderedDesign {
        let n = 40;
        let noise = |seed: usize, i: usize| ((i * 7919 + seed * 104729) % 1000) as f64 / 1000.0 - 0.5;
        let x: Vec<f64> = (0..n).map(|i| noise(1, i) * 2.0 + (i as f64 * 0.1).sin()).collect();
        let inc: Vec<f64> = (0..n).map(|i| 0.8 * x[i] + noise(2, i)).collect();
        let pool: Vec<f64> = (0..n).map(|i| 0.3 * x[i] + 0.5 * inc[i] + noise(3, i)).collect();
        let gen: Vec<f64> = (0..n)
            .map(|i| -0.2 * x[i] + 0.2 * inc[i] + 0.4 * pool[i] + noise(4, i))
            .collect();
        OrderedDesign::from_columns(
            vec![
                ("x".into(), 0, x),
                ("incentive".into(), 1, inc),
                ("pool".into(), 2, pool),
                ("gen".into(), 3, gen),
            ],
            true,
        )
        .unwrap()
    }

    fn ordering() -> CausalOrdering {
        CausalOrdering {
            groups: vec![VariableGroup {
                label: "controls".into(),
                members: vec!["x".into()],
            }],
            chain: vec!["incentive".into(), "pool".into(), "gen".into()],
        }
    }

    #[test]
    fn total_effect_identity_holds_in_sample() {
        let d = chain_design();
        let est = estimate_system(&d, &ordering()).unwrap();
        assert!(est.identity.passed, "{:?}", est.identity);
        let (i, a, g) = (2, 3, 4);
        let alpha = |c, o| est.direct.coefficient(c, o).unwrap();
        let beta_ig = est.total.coefficient(i, g).unwrap();
        assert!((beta_ig - (alpha(i, g) + alpha(i, a) * alpha(a, g))).abs() < 1e-10);
        // terminal regressor: GSLS coefficient equals OLS
        assert!((est.total.coefficient(a, g).unwrap() - alpha(a, g)).abs() < 1e-10);
        // GSLS intercept on demeaned regressors is the outcome mean
        let mean_g = d.column(g).mean();
        assert!((est.total.coefficient(0, g).unwrap() - mean_g).abs() < 1e-10);
    }

    #[test]
    fn hand_recursion_three_variable_chain() {
        // b12 = 2, b13 = 1, b23 = 3 -> a13 = 1 + 2 * 3 = 7, built as an exact
        // noiseless system so the fitted directs equal the structural ones
        let n = 12;
        let x1: Vec<f64> = (0..n).map(|i| ((i * 5) % 7) as f64).collect();
        let e2: Vec<f64> = (0..n).map(|i| ((i * 3) % 5) as f64 - 2.0).collect();
        let x2: Vec<f64> = x1.iter().zip(&e2).map(|(a, e)| 2.0 * a + e).collect();
        let e3: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 } * (i % 3) as f64).collect();
        let x3: Vec<f64> = (0..n).map(|i| x1[i] + 3.0 * x2[i] + e3[i]).collect();
        let d = OrderedDesign::from_columns(
            vec![("x1".into(), 0, x1), ("x2".into(), 1, x2), ("x3".into(), 2, x3)],
            false,
        )
        .unwrap();
        let direct = estimate_direct(&d, &all_equations(&d)).unwrap();
        let implied = decompose_total(&direct, &[2]).unwrap();
        let b12 = direct.coefficient(0, 1).unwrap();
        let b13 = direct.coefficient(0, 2).unwrap();
        let b23 = direct.coefficient(1, 2).unwrap();
        assert!((implied.get(0, 2).unwrap() - (b13 + b12 * b23)).abs() < 1e-12);
        let total = estimate_total_gsls(&d, &[2]).unwrap();
        assert!((total.coefficient(0, 2).unwrap() - implied.get(0, 2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn empty_direct_table_is_incomplete() {
        let direct = SystemFit {
            kind: EffectKind::Direct,
            names: vec!["a".into(), "b".into(), "c".into()],
            groups: vec![0, 1, 2],
            equations: vec![],
        };
        // with no equations at all the recursion is incomplete
        assert!(matches!(decompose_total(&direct, &[2]), Err(Error::IncompleteTable { .. })));
    }

    #[test]
    fn missing_intermediate_equation_is_reported() {
        let d = chain_design();
        let direct = estimate_direct(&d, &[4]).unwrap();
        match decompose_total(&direct, &[4]) {
            Err(Error::IncompleteTable { outcome, .. }) => assert_eq!(outcome, "x"),
            other => panic!("expected IncompleteTable, got {other:?}"),
        }
    }

    #[test]
    fn single_equation_reduces_to_ols() {
        let d = chain_design();
        let two = OrderedDesign::from_columns(
            vec![("x".into(), 0, d.column(1).iter().copied().collect()), ("gen".into(), 1, d.column(4).iter().copied().collect())],
            true,
        )
        .unwrap();
        let ord = CausalOrdering {
            groups: vec![VariableGroup {
                label: "x".into(),
                members: vec!["x".into()],
            }],
            chain: vec!["gen".into()],
        };
        let est = estimate_system(&two, &ord).unwrap();
        let plain = ols_fit(&two, 2).unwrap();
        let eq = est.direct.equation(2).unwrap();
        assert_eq!(eq.fit.coefficients, plain.coefficients);
        assert_eq!(eq.fit.std_errors, plain.std_errors);
    }

    #[test]
    fn ordering_validation() {
        let d = chain_design();
        let mut bad = ordering();
        bad.chain = vec!["pool".into(), "incentive".into(), "gen".into()];
        assert!(bad.validate(&d).is_err());
        let mut missing = ordering();
        missing.groups.clear();
        assert!(missing.validate(&d).is_err());
        assert!(ordering().validate(&d).is_ok());
    }

    #[test]
    fn star_thresholds_are_strict() {
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.0099), "**");
        assert_eq!(stars(0.0009), "***");
        assert_eq!(stars(0.05), "");
        assert_eq!(stars(0.01), "*");
        assert_eq!(stars(0.001), "**");
    }
}
