//! Finite-sample diagnostics for GSLS against OLS on a known recursive
//! data-generating process.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    coefficient_covariance, gram_schmidt_residualize, max_cross_group_correlation, ols_fit, OrderedDesign,
};
use crate::stats::{covariance, mean, variance};

use super::estimate_total_on;

/// Linear recursive system `x_j = c_j + sum_i b_ij x_i + e_j` where `i` runs
/// over variables in strictly earlier groups. Noise within a group may be
/// correlated; the last variable is the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDgp {
    pub names: Vec<String>,
    pub groups: Vec<usize>,
    /// `direct[i][j]`: structural effect of variable `i` on variable `j`.
    pub direct: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub noise_sd: Vec<f64>,
    /// Noise correlation between members of the same group.
    pub within_group_correlation: f64,
}

impl ChainDgp {
    /// Four-variable chain `x -> i -> a -> g` with a confounding control.
    pub fn standard() -> Self {
        let names = ["x", "incentive", "pool", "gen"].map(String::from).to_vec();
        let mut direct = vec![vec![0.0; 4]; 4];
        direct[0][1] = 0.8;
        direct[0][2] = 0.3;
        direct[0][3] = -0.2;
        direct[1][2] = 0.5;
        direct[1][3] = 0.2;
        direct[2][3] = 0.4;
        Self {
            names,
            groups: vec![0, 1, 2, 3],
            direct,
            intercepts: vec![1.0, 0.5, -0.5, 2.0],
            noise_sd: vec![1.0, 1.0, 1.0, 1.0],
            within_group_correlation: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.len();
        if k < 2
            || self.groups.len() != k
            || self.direct.len() != k
            || self.direct.iter().any(|r| r.len() != k)
            || self.intercepts.len() != k
            || self.noise_sd.len() != k
        {
            return Err(Error::InvalidInput("chain DGP dimensions disagree".into()));
        }
        if self.groups.windows(2).any(|w| w[1] < w[0]) || self.groups[k - 2] == self.groups[k - 1] {
            return Err(Error::InvalidInput("chain DGP groups must be ordered with the outcome alone".into()));
        }
        for i in 0..k {
            for j in 0..k {
                if self.direct[i][j] != 0.0 && self.groups[i] >= self.groups[j] {
                    return Err(Error::InvalidInput(format!(
                        "effect of `{}` on `{}` does not follow the ordering",
                        self.names[i], self.names[j]
                    )));
                }
            }
        }
        if !(0.0..1.0).contains(&self.within_group_correlation) {
            return Err(Error::InvalidInput("within-group correlation must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// True total effects from the reduced form `(I - B)^-1`.
    pub fn true_totals(&self) -> DMatrix<f64> {
        let k = self.len();
        let b = DMatrix::from_fn(k, k, |i, j| self.direct[i][j]);
        (DMatrix::identity(k, k) - b)
            .try_inverse()
            .expect("strictly triangular effects give a unit triangular system")
    }

    fn noise(&self, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let k = self.len();
        let rho = self.within_group_correlation;
        let mut e = DMatrix::zeros(n, k);
        for r in 0..n {
            let mut last_group = usize::MAX;
            let mut common = 0.0;
            for j in 0..k {
                if self.groups[j] != last_group {
                    common = rng.sample::<f64, _>(StandardNormal);
                    last_group = self.groups[j];
                }
                let own: f64 = rng.sample(StandardNormal);
                e[(r, j)] = self.noise_sd[j] * (rho.sqrt() * common + (1.0 - rho).sqrt() * own);
            }
        }
        e
    }

    fn propagate(&self, e: &DMatrix<f64>, from: usize, values: &mut DMatrix<f64>) {
        let k = self.len();
        for j in from..k {
            for r in 0..values.nrows() {
                let mut v = self.intercepts[j] + e[(r, j)];
                for i in 0..j {
                    v += self.direct[i][j] * values[(r, i)];
                }
                values[(r, j)] = v;
            }
        }
    }

    /// Draw `n` observations.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<OrderedDesign> {
        self.validate()?;
        let e = self.noise(n, rng);
        let mut values = DMatrix::zeros(n, self.len());
        self.propagate(&e, 0, &mut values);
        self.to_design(&values)
    }

    /// Redraw only the outcome given fixed upstream variables.
    pub fn resample_outcome(&self, base: &OrderedDesign, rng: &mut ChaCha8Rng) -> Result<OrderedDesign> {
        let n = base.nrows();
        let k = self.len();
        let mut values = base.data().columns(1, k).into_owned();
        let mut e = DMatrix::zeros(n, k);
        for r in 0..n {
            e[(r, k - 1)] = self.noise_sd[k - 1] * rng.sample::<f64, _>(StandardNormal);
        }
        self.propagate(&e, k - 1, &mut values);
        self.to_design(&values)
    }

    fn to_design(&self, values: &DMatrix<f64>) -> Result<OrderedDesign> {
        let cols = (0..self.len())
            .map(|j| (self.names[j].clone(), self.groups[j], values.column(j).iter().copied().collect()))
            .collect();
        OrderedDesign::from_columns(cols, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub replications: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            replications: 10_000,
            sample_size: 200,
            seed: 20_240_501,
        }
    }
}

/// Per-coefficient summary for the outcome equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDiagnostics {
    pub name: String,
    /// Member of the last regressor group, where GSLS and OLS coincide.
    pub terminal: bool,
    pub true_direct: f64,
    pub true_total: f64,
    /// Mean and Monte Carlo standard error over fully regenerated samples.
    pub gsls_mean: f64,
    pub gsls_mc_se: f64,
    pub ols_mean: f64,
    pub ols_mc_se: f64,
    /// Variances with the upstream design held fixed.
    pub gsls_variance: f64,
    pub ols_variance: f64,
    pub variance_ratio: f64,
    /// The same ratio across fully regenerated samples.
    pub unconditional_variance_ratio: f64,
}

impl CoefficientDiagnostics {
    pub fn gsls_bias_z(&self) -> f64 {
        (self.gsls_mean - self.true_total) / self.gsls_mc_se
    }

    pub fn ols_bias_z(&self) -> f64 {
        (self.ols_mean - self.true_direct) / self.ols_mc_se
    }
}

/// Covariance between two GSLS outcome-equation coefficients from different
/// groups, by the closed-form expression and by simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCovariance {
    pub first: String,
    pub second: String,
    pub residual_correlation: f64,
    pub formula: f64,
    pub monte_carlo: f64,
    pub monte_carlo_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub replications: usize,
    pub sample_size: usize,
    /// Largest |correlation| between residualized regressors of different
    /// groups in the fixed design.
    pub max_cross_group_correlation: f64,
    pub coefficients: Vec<CoefficientDiagnostics>,
    pub covariances: Vec<PairCovariance>,
}

impl EfficiencyReport {
    /// Every GSLS mean within `z` Monte Carlo standard errors of the true
    /// total effect.
    pub fn unbiased(&self, z: f64) -> bool {
        self.coefficients.iter().all(|c| c.gsls_bias_z().abs() <= z)
    }

    /// Conditional variance ratio at most `1 + tol` for every slope, and
    /// within `tol` of one for terminal coefficients.
    pub fn efficient(&self, tol: f64) -> bool {
        self.coefficients.iter().all(|c| {
            if c.terminal {
                (c.variance_ratio - 1.0).abs() <= tol
            } else {
                c.variance_ratio <= 1.0 + tol
            }
        })
    }
}

struct Draw {
    gsls: Vec<f64>,
    ols: Vec<f64>,
}

fn draw(design: &OrderedDesign) -> Result<Draw> {
    let y = design.outcome_index();
    let ols = ols_fit(design, y)?.coefficients.to_vec();
    let resid = gram_schmidt_residualize(design)?;
    let total = estimate_total_on(design, &resid, &[y])?;
    Ok(Draw {
        gsls: total.equations[0].fit.coefficients.to_vec(),
        ols,
    })
}

fn rep_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn column(draws: &[Draw], k: usize, gsls: bool) -> Vec<f64> {
    draws
        .iter()
        .map(|d| if gsls { d.gsls[k] } else { d.ols[k] })
        .collect()
}

/// Simulate the outcome equation under `dgp` and compare GSLS with OLS:
/// unbiasedness against true totals across fully regenerated samples,
/// variance ratios and cross-group covariances with the upstream design held
/// fixed.
pub fn efficiency_diagnostics(dgp: &ChainDgp, config: &MonteCarloConfig) -> Result<EfficiencyReport> {
    dgp.validate()?;
    if config.replications < 2 {
        return Err(Error::InvalidInput("at least two replications are required".into()));
    }
    let reps = config.replications as u64;
    let n = config.sample_size;

    let unconditional: Vec<Draw> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rep_rng(config.seed, r + 1);
            draw(&dgp.sample(n, &mut rng)?)
        })
        .collect::<Result<_>>()?;

    let base = dgp.sample(n, &mut rep_rng(config.seed, 0))?;
    let conditional: Vec<Draw> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rep_rng(config.seed ^ 0x9e37_79b9_7f4a_7c15, r + 1);
            draw(&dgp.resample_outcome(&base, &mut rng)?)
        })
        .collect::<Result<_>>()?;

    let totals = dgp.true_totals();
    let k = dgp.len();
    let outcome = k - 1;
    let last_group = dgp.groups[k - 2];
    let root_r = (reps as f64).sqrt();
    let mut coefficients = Vec::with_capacity(k);
    // column 0 of each fit is the intercept; variable v sits at column v + 1
    for c in 0..k {
        let (name, terminal, true_direct, true_total) = if c == 0 {
            let mean_outcome = reduced_form_mean(dgp, &totals);
            ("(Intercept)".to_string(), false, dgp.intercepts[outcome], mean_outcome)
        } else {
            let v = c - 1;
            (
                dgp.names[v].clone(),
                dgp.groups[v] == last_group,
                dgp.direct[v][outcome],
                totals[(v, outcome)],
            )
        };
        let g_u = column(&unconditional, c, true);
        let o_u = column(&unconditional, c, false);
        let g_c = column(&conditional, c, true);
        let o_c = column(&conditional, c, false);
        let (gv, ov) = (variance(&g_c), variance(&o_c));
        coefficients.push(CoefficientDiagnostics {
            name,
            terminal,
            true_direct,
            true_total,
            gsls_mean: mean(&g_u),
            gsls_mc_se: variance(&g_u).sqrt() / root_r,
            ols_mean: mean(&o_u),
            ols_mc_se: variance(&o_u).sqrt() / root_r,
            gsls_variance: gv,
            ols_variance: ov,
            variance_ratio: gv / ov,
            unconditional_variance_ratio: variance(&g_u) / variance(&o_u),
        });
    }

    let resid = gram_schmidt_residualize(&base)?;
    let sigma2 = dgp.noise_sd[outcome].powi(2);
    let mut covariances = Vec::new();
    for a in 1..k {
        for b in (a + 1)..k {
            if dgp.groups[a - 1] == dgp.groups[b - 1] {
                continue;
            }
            let xa = resid.column(a);
            let xb = resid.column(b);
            let r = xa.dot(&xb) / (xa.norm() * xb.norm());
            let ga = column(&conditional, a, true);
            let gb = column(&conditional, b, true);
            let (ma, mb) = (mean(&ga), mean(&gb));
            let products: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| (x - ma) * (y - mb)).collect();
            covariances.push(PairCovariance {
                first: dgp.names[a - 1].clone(),
                second: dgp.names[b - 1].clone(),
                residual_correlation: r,
                formula: coefficient_covariance(sigma2 / (xa.norm() * xb.norm()), r)?,
                monte_carlo: covariance(&ga, &gb),
                monte_carlo_se: variance(&products).sqrt() / root_r,
            });
        }
    }

    Ok(EfficiencyReport {
        replications: config.replications,
        sample_size: n,
        max_cross_group_correlation: max_cross_group_correlation(&resid),
        coefficients,
        covariances,
    })
}

/// Population mean of the outcome: reduced-form image of the intercepts.
fn reduced_form_mean(dgp: &ChainDgp, totals: &DMatrix<f64>) -> f64 {
    let c = DVector::from_vec(dgp.intercepts.clone());
    (totals.transpose() * c)[dgp.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_form_totals_match_path_sums() {
        let dgp = ChainDgp::standard();
        let t = dgp.true_totals();
        // x -> g: -0.2 + 0.8*0.2 + 0.3*0.4 + 0.8*0.5*0.4
        assert!((t[(0, 3)] - (-0.2 + 0.16 + 0.12 + 0.16)).abs() < 1e-12);
        // incentive -> g: 0.2 + 0.5*0.4
        assert!((t[(1, 3)] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn outcome_resampling_keeps_upstream() {
        let dgp = ChainDgp::standard();
        let base = dgp.sample(30, &mut rep_rng(1, 0)).unwrap();
        let again = dgp.resample_outcome(&base, &mut rep_rng(1, 5)).unwrap();
        for j in 0..4 {
            assert_eq!(base.column(j), again.column(j));
        }
        assert_ne!(base.column(4), again.column(4));
    }

    #[test]
    fn small_monte_carlo_runs() {
        let cfg = MonteCarloConfig {
            replications: 200,
            sample_size: 60,
            seed: 3,
        };
        let report = efficiency_diagnostics(&ChainDgp::standard(), &cfg).unwrap();
        assert!(report.max_cross_group_correlation < 1e-10);
        let terminal = report.coefficients.iter().find(|c| c.terminal).unwrap();
        assert!((terminal.variance_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_dgp_is_rejected() {
        let mut dgp = ChainDgp::standard();
        dgp.direct[3][1] = 1.0;
        assert!(dgp.validate().is_err());
    }
}
