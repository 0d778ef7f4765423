//! Ordered designs, least-squares fits, and grouped Gram-Schmidt
//! residualization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Pivots smaller than this fraction of the column norm are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A causally ordered design: regressor columns followed by the outcome column.
///
/// `groups` marks simultaneity groups. Ids never decrease from left to right;
/// the outcome sits alone in the last group and the intercept, when present,
/// alone in the first.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedDesign {
    data: DMatrix<f64>,
    names: Vec<String>,
    groups: Vec<usize>,
    residualized: Vec<bool>,
    has_intercept: bool,
}

impl OrderedDesign {
    pub fn new(data: DMatrix<f64>, names: Vec<String>, groups: Vec<usize>, has_intercept: bool) -> Result<Self> {
        let k = data.ncols();
        if k < 2 {
            return Err(Error::InvalidDesign("need at least one regressor and an outcome".into()));
        }
        if names.len() != k || groups.len() != k {
            return Err(Error::InvalidDesign(format!(
                "{k} columns but {} names and {} group ids",
                names.len(),
                groups.len()
            )));
        }
        if groups.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDesign("group ids must not decrease".into()));
        }
        if groups[k - 1] == groups[k - 2] {
            return Err(Error::InvalidDesign("the outcome column must form its own group".into()));
        }
        if has_intercept {
            if data.column(0).iter().any(|&v| v != 1.0) {
                return Err(Error::InvalidDesign("intercept column must be all ones".into()));
            }
            if groups[1] == groups[0] {
                return Err(Error::InvalidDesign("the intercept must form its own group".into()));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDesign("design contains non-finite values".into()));
        }
        if data.nrows() < k {
            return Err(Error::InsufficientData {
                rows: data.nrows(),
                params: k - 1,
            });
        }
        Ok(Self {
            residualized: vec![false; k],
            data,
            names,
            groups,
            has_intercept,
        })
    }

    /// Build from `(name, group, values)` columns in causal order. When
    /// `intercept` is set a column of ones named `(Intercept)` is prepended and
    /// every supplied group id is shifted up by one.
    pub fn from_columns(columns: Vec<(String, usize, Vec<f64>)>, intercept: bool) -> Result<Self> {
        let n = columns.first().map(|c| c.2.len()).unwrap_or(0);
        if columns.iter().any(|c| c.2.len() != n) {
            return Err(Error::InvalidDesign("columns differ in length".into()));
        }
        let shift = usize::from(intercept);
        let k = columns.len() + shift;
        let mut data = DMatrix::zeros(n, k);
        let mut names = Vec::with_capacity(k);
        let mut groups = Vec::with_capacity(k);
        if intercept {
            data.column_mut(0).fill(1.0);
            names.push(INTERCEPT.to_string());
            groups.push(0);
        }
        for (j, (name, group, values)) in columns.into_iter().enumerate() {
            data.column_mut(j + shift).copy_from_slice(&values);
            names.push(name);
            groups.push(group + shift);
        }
        Self::new(data, names, groups, intercept)
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn outcome_index(&self) -> usize {
        self.ncols() - 1
    }

    pub fn is_residualized(&self, j: usize) -> bool {
        self.residualized[j]
    }

    /// Display name, with a marker on residualized columns.
    pub fn display_name(&self, j: usize) -> String {
        if self.residualized[j] {
            format!("{} (resid)", self.names[j])
        } else {
            self.names[j].clone()
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.data.column(j).into_owned()
    }

    /// Columns belonging to groups strictly earlier than the group of `j`.
    pub fn earlier_columns(&self, j: usize) -> Vec<usize> {
        let g = self.groups[j];
        (0..j).filter(|&i| self.groups[i] < g).collect()
    }

    /// Keep only the given rows (in order).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let data = self.data.select_rows(rows.iter());
        let mut out = Self::new(data, self.names.clone(), self.groups.clone(), self.has_intercept)?;
        out.residualized = self.residualized.clone();
        Ok(out)
    }

    /// Checks full column rank of the regressor block.
    pub fn check_rank(&self) -> Result<()> {
        let regressors: Vec<usize> = (0..self.outcome_index()).collect();
        let x = self.data.select_columns(regressors.iter());
        let names: Vec<String> = regressors.iter().map(|&j| self.names[j].clone()).collect();
        qr_factor(&x, &names).map(|_| ())
    }
}

pub const INTERCEPT: &str = "(Intercept)";

/// Coefficient estimate with classical inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub sigma2: f64,
    pub ssr: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub dof: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub f_stat: f64,
    pub has_intercept: bool,
}

impl FitResult {
    pub fn estimate(&self, j: usize) -> Estimate {
        Estimate {
            coef: self.coefficients[j],
            se: self.std_errors[j],
            t: self.t_stats[j],
            p: self.p_values[j],
        }
    }

    pub fn estimate_by_name(&self, name: &str) -> Option<Estimate> {
        self.names.iter().position(|n| n == name).map(|j| self.estimate(j))
    }
}

struct QrFactor {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// Thin Householder QR with a per-column pivot check.
fn qr_factor(x: &DMatrix<f64>, names: &[String]) -> Result<QrFactor> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InsufficientData { rows: n, params: p });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() < RANK_TOLERANCE * norm {
            return Err(Error::RankDeficient {
                column: names[j].clone(),
            });
        }
    }
    Ok(QrFactor { q: qr.q(), r })
}

/// Least squares of `y` on the columns of `x` with classical homoskedastic
/// inference. `intercept` only affects how R-squared and F are centered.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String], intercept: bool) -> Result<FitResult> {
    let (n, p) = x.shape();
    if names.len() != p || y.len() != n {
        return Err(Error::InvalidDesign("shape mismatch between regressors, names and outcome".into()));
    }
    let QrFactor { q, r } = qr_factor(x, names)?;
    let qty = q.transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient {
            column: names[p - 1].clone(),
        })?;
    let fitted = x * &coefficients;
    let residuals = y - &fitted;
    let ssr = residuals.norm_squared();
    let dof = n - p;
    let sigma2 = ssr / dof as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient {
            column: names[p - 1].clone(),
        })?;
    let covariance = (&r_inv * r_inv.transpose()) * sigma2;
    let std_errors: Vec<f64> = (0..p).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    let coefficients: Vec<f64> = coefficients.iter().copied().collect();
    let t_stats: Vec<f64> = coefficients.iter().zip(&std_errors).map(|(b, s)| b / s).collect();
    let p_values: Vec<f64> = t_stats.iter().map(|&t| stats::t_two_sided(t, dof as f64)).collect();

    let centered = usize::from(intercept);
    let sst = if intercept {
        let m = y.mean();
        y.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let r2 = 1.0 - ssr / sst;
    let adj_r2 = 1.0 - (1.0 - r2) * (n - centered) as f64 / dof as f64;
    let nf = n as f64;
    let log_likelihood = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + (ssr / nf).ln() + 1.0);
    let k_params = (p + 1) as f64;
    let aic = -2.0 * log_likelihood + 2.0 * k_params;
    let bic = -2.0 * log_likelihood + nf.ln() * k_params;
    let f_stat = if p > centered {
        ((sst - ssr) / (p - centered) as f64) / sigma2
    } else {
        f64::NAN
    };

    Ok(FitResult {
        names: names.to_vec(),
        coefficients,
        std_errors,
        t_stats,
        p_values,
        covariance,
        residuals,
        fitted,
        sigma2,
        ssr,
        r2,
        adj_r2,
        n,
        dof,
        log_likelihood,
        aic,
        bic,
        f_stat,
        has_intercept: intercept,
    })
}

/// Regress column `y_index` on every column that precedes it.
pub fn ols_fit(design: &OrderedDesign, y_index: usize) -> Result<FitResult> {
    let regressors: Vec<usize> = (0..y_index).collect();
    ols_on(design, y_index, &regressors)
}

/// Regress column `y_index` on an explicit set of regressor columns.
pub fn ols_on(design: &OrderedDesign, y_index: usize, regressors: &[usize]) -> Result<FitResult> {
    if y_index >= design.ncols() {
        return Err(Error::InvalidDesign(format!("no column {y_index}")));
    }
    if regressors.is_empty() {
        return Err(Error::InvalidDesign(format!(
            "`{}` has no regressors",
            design.name(y_index)
        )));
    }
    let x = design.data.select_columns(regressors.iter());
    let y = design.column(y_index);
    let names: Vec<String> = regressors.iter().map(|&j| design.names[j].clone()).collect();
    let intercept = design.has_intercept && regressors.first() == Some(&0);
    ols(&x, &y, &names, intercept)
}

/// Subtract the projection onto each orthonormal basis vector in turn, twice.
fn project_out(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let coef = q.dot(v);
            v.axpy(-coef, q, 1.0);
        }
    }
}

/// Replace every regressor column by its residual from a regression on all
/// columns of strictly earlier groups (modified Gram-Schmidt with one
/// re-orthogonalization pass). Columns sharing a group are residualized on the
/// same earlier span and keep their mutual correlation. The intercept, the
/// first group and the outcome column are left untouched.
pub fn gram_schmidt_residualize(design: &OrderedDesign) -> Result<OrderedDesign> {
    let k = design.ncols();
    let outcome = design.outcome_index();
    let mut out = design.clone();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(outcome);

    let mut start = 0;
    while start < outcome {
        let g = design.groups[start];
        let end = (start..outcome).find(|&j| design.groups[j] != g).unwrap_or(outcome);

        for j in start..end {
            let original = design.data.column(j);
            let norm = original.norm();
            let mut v = original.into_owned();
            if !basis.is_empty() {
                project_out(&mut v, &basis);
                out.residualized[j] = true;
            }
            if norm == 0.0 || v.norm() <= RANK_TOLERANCE * norm {
                return Err(Error::RankDeficient {
                    column: design.names[j].clone(),
                });
            }
            out.data.column_mut(j).copy_from(&v);
        }
        // extend the span with this group's residuals, orthonormalized among
        // themselves for the basis only
        for j in start..end {
            let mut w = out.data.column(j).into_owned();
            project_out(&mut w, &basis);
            let norm = w.norm();
            if norm <= RANK_TOLERANCE * design.data.column(j).norm() {
                return Err(Error::RankDeficient {
                    column: design.names[j].clone(),
                });
            }
            basis.push(w / norm);
        }
        start = end;
    }
    debug_assert_eq!(out.ncols(), k);
    Ok(out)
}

/// Uncentered correlation `u_i'u_j / sqrt(u_i'u_i u_j'u_j)` of two residual
/// vectors.
pub fn residual_correlation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b) / (a.norm_squared() * b.norm_squared()).sqrt()
}

/// Covariance of two same-equation coefficients whose (residualized)
/// regressors have correlation `r`: `sigma2 * (-r) / (1 - r^2)`.
pub fn coefficient_covariance(sigma2: f64, r: f64) -> Result<f64> {
    if !r.is_finite() || r.abs() >= 1.0 - 1e-12 {
        return Err(Error::DegenerateCorrelation(r));
    }
    Ok(sigma2 * (-r) / (1.0 - r * r))
}

/// Largest absolute correlation between columns of different groups (outcome
/// and intercept excluded).
pub fn max_cross_group_correlation(design: &OrderedDesign) -> f64 {
    let first = usize::from(design.has_intercept);
    let outcome = design.outcome_index();
    let cols: Vec<DVector<f64>> = (0..outcome).map(|j| design.column(j)).collect();
    let mut worst: f64 = 0.0;
    for i in first..outcome {
        for j in (i + 1)..outcome {
            if design.groups[i] != design.groups[j] {
                worst = worst.max(residual_correlation(&cols[i], &cols[j]).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: Vec<(&str, usize, Vec<f64>)>, intercept: bool) -> OrderedDesign {
        OrderedDesign::from_columns(
            cols.into_iter().map(|(n, g, v)| (n.to_string(), g, v)).collect(),
            intercept,
        )
        .unwrap()
    }

    #[test]
    fn orthogonal_exact_fit() {
        let x1 = vec![1.0, -1.0, 1.0, -1.0];
        let x2 = vec![1.0, 1.0, -1.0, -1.0];
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a + 3.0 * b).collect();
        let d = design(vec![("x1", 0, x1), ("x2", 1, x2), ("y", 2, y)], false);
        let fit = ols_fit(&d, 2).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-14);
        assert!(fit.residuals.amax() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_columns_are_rank_deficient() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y = vec![1.0, 0.0, 2.0, 1.0, 3.0];
        let d = design(vec![("x1", 0, x1), ("x2", 1, x2), ("y", 2, y)], false);
        match ols_fit(&d, 2) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, "x2"),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(matches!(gram_schmidt_residualize(&d), Err(Error::RankDeficient { .. })));
        assert!(matches!(d.check_rank(), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn too_few_rows() {
        let err = OrderedDesign::from_columns(
            vec![
                ("x1".into(), 0, vec![1.0, 2.0]),
                ("x2".into(), 1, vec![0.0, 1.0]),
                ("y".into(), 2, vec![1.0, 0.5]),
            ],
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientData { rows: 2, params: 2 }));
    }

    #[test]
    fn design_invariants() {
        let mk = |groups: Vec<usize>| {
            OrderedDesign::new(
                DMatrix::from_fn(6, 3, |i, j| (i * 3 + j) as f64 + (i * j) as f64 * 0.1),
                vec!["a".into(), "b".into(), "y".into()],
                groups,
                false,
            )
        };
        assert!(mk(vec![0, 1, 2]).is_ok());
        assert!(mk(vec![0, 0, 1]).is_ok());
        assert!(matches!(mk(vec![1, 0, 2]), Err(Error::InvalidDesign(_))));
        assert!(matches!(mk(vec![0, 1, 1]), Err(Error::InvalidDesign(_))));
    }

    #[test]
    fn orthogonal_columns_survive_residualization() {
        let x1 = vec![1.0, -1.0, 1.0, -1.0, 0.0];
        let x2 = vec![1.0, 1.0, -1.0, -1.0, 0.0];
        let y = vec![0.3, 0.1, -0.2, 0.5, 0.0];
        let d = design(vec![("x1", 0, x1.clone()), ("x2", 1, x2.clone()), ("y", 2, y)], true);
        let r = gram_schmidt_residualize(&d).unwrap();
        // both columns already have zero mean and are mutually orthogonal
        for (j, orig) in [(1, &x1), (2, &x2)] {
            for (a, b) in r.column(j).iter().zip(orig.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(r.is_residualized(1));
        assert_eq!(r.display_name(1), "x1 (resid)");
        assert!(!r.is_residualized(0));
        assert_eq!(r.column(3), d.column(3));
    }

    #[test]
    fn residualizing_twice_is_identity() {
        let n = 25;
        let cols = (0..4)
            .map(|j| {
                (
                    format!("x{j}"),
                    j.min(2),
                    (0..n).map(|i| ((i * (j + 3)) % 7) as f64 + (i as f64 * 0.37 * (j + 1) as f64).sin()).collect(),
                )
            })
            .chain(std::iter::once(("y".to_string(), 3, (0..n).map(|i| i as f64).collect())))
            .collect();
        let d = OrderedDesign::from_columns(cols, true).unwrap();
        let once = gram_schmidt_residualize(&d).unwrap();
        let twice = gram_schmidt_residualize(&once).unwrap();
        assert!((once.data() - twice.data()).amax() < 1e-10);
        assert!(max_cross_group_correlation(&once) < 1e-12);
    }

    #[test]
    fn coefficient_covariance_formula() {
        assert_eq!(coefficient_covariance(1.0, 0.0).unwrap(), 0.0);
        assert!((coefficient_covariance(1.0, 0.5).unwrap() + 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            coefficient_covariance(1.0, 1.0 - 1e-13),
            Err(Error::DegenerateCorrelation(_))
        ));
        assert!(matches!(
            coefficient_covariance(1.0, -1.0),
            Err(Error::DegenerateCorrelation(_))
        ));
    }

    #[test]
    fn information_criteria_follow_gaussian_likelihood() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = vec![0.1, 0.9, 2.2, 2.8, 4.1, 5.3];
        let d = design(vec![("x", 0, x), ("y", 1, y)], true);
        let fit = ols_fit(&d, 2).unwrap();
        let n = 6.0_f64;
        let ll = -n / 2.0 * ((2.0 * std::f64::consts::PI * fit.ssr / n).ln() + 1.0);
        assert!((fit.log_likelihood - ll).abs() < 1e-12);
        assert!((fit.aic - (-2.0 * ll + 6.0)).abs() < 1e-12);
        assert!((fit.bic - (-2.0 * ll + 3.0 * n.ln())).abs() < 1e-12);
        // single regressor plus intercept: F = t^2
        assert!((fit.f_stat - fit.t_stats[1].powi(2)).abs() < 1e-8 * fit.f_stat);
    }
}
