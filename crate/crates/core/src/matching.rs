//! Mahalanobis nearest-neighbor matching of active-incentive intervals to
//! inactive ones, the average treatment effect on the treated, and covariate
//! balance diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::IntervalTable;
use crate::stats::{weighted_mean_var, z_two_sided};

/// Pivot tolerance for the covariance factorization, relative to the
/// covariate's own variance.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchSpec {
    pub covariates: Vec<String>,
    /// Rows with this column above zero are treated.
    #[serde(default = "default_treatment")]
    pub treatment: String,
    #[serde(default = "default_outcome")]
    pub outcome: String,
    /// Matches per treated row.
    #[serde(default = "default_matches")]
    pub matches: usize,
    #[serde(default = "default_true")]
    pub with_replacement: bool,
    /// Restrict candidates to the treated row's calendar year (needs a `year`
    /// column).
    #[serde(default)]
    pub block_by_year: bool,
}

fn default_treatment() -> String {
    "incentive".into()
}
fn default_outcome() -> String {
    "energy_price".into()
}
fn default_matches() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl MatchSpec {
    pub fn new(covariates: &[&str]) -> Self {
        Self {
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            treatment: default_treatment(),
            outcome: default_outcome(),
            matches: 1,
            with_replacement: true,
            block_by_year: false,
        }
    }
}

/// Covariates, treatment indicator and outcome, one entry per row.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchData {
    pub names: Vec<String>,
    pub covariates: Vec<Vec<f64>>,
    pub treated: Vec<bool>,
    pub outcome: Vec<f64>,
    pub block: Option<Vec<i64>>,
}

impl MatchData {
    pub fn new(names: Vec<String>, covariates: Vec<Vec<f64>>, treated: Vec<bool>, outcome: Vec<f64>) -> Result<Self> {
        let n = covariates.len();
        if treated.len() != n || outcome.len() != n || covariates.iter().any(|r| r.len() != names.len()) {
            return Err(Error::InvalidInput("matching inputs differ in length".into()));
        }
        Ok(Self {
            names,
            covariates,
            treated,
            outcome,
            block: None,
        })
    }

    /// Extract matching inputs from an interval table. Rows with a missing
    /// covariate, treatment or outcome are skipped.
    pub fn from_intervals(table: &IntervalTable, spec: &MatchSpec) -> Result<Self> {
        let cols: Vec<&[f64]> = spec
            .covariates
            .iter()
            .map(|c| table.column(c))
            .collect::<Result<_>>()?;
        let treat = table.column(&spec.treatment)?;
        let y = table.column(&spec.outcome)?;
        let year = if spec.block_by_year { Some(table.column("year")?) } else { None };
        let mut data = Self {
            names: spec.covariates.clone(),
            covariates: Vec::new(),
            treated: Vec::new(),
            outcome: Vec::new(),
            block: year.map(|_| Vec::new()),
        };
        for r in 0..table.len() {
            let row: Vec<f64> = cols.iter().map(|c| c[r]).collect();
            if row.iter().any(|x| x.is_nan()) || treat[r].is_nan() || y[r].is_nan() {
                continue;
            }
            data.covariates.push(row);
            data.treated.push(treat[r] > 0.0);
            data.outcome.push(y[r]);
            if let (Some(b), Some(yr)) = (data.block.as_mut(), year) {
                b.push(yr[r] as i64);
            }
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub treated: usize,
    pub control: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub raw: usize,
    pub treated: usize,
    pub controls: usize,
    pub matched_treated: usize,
    /// Distinct control rows used at least once.
    pub distinct_controls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSample {
    pub matches_per_treated: usize,
    /// Grouped by treated row, nearest first.
    pub pairs: Vec<MatchPair>,
    /// Times each row is used as a match (zero for treated rows).
    pub control_uses: Vec<usize>,
    pub counts: MatchCounts,
}

impl MatchedSample {
    /// Frequency weight of each row as a control: uses divided by matches
    /// per treated row, so weights sum to the treated count.
    pub fn control_weights(&self) -> Vec<f64> {
        let m = self.matches_per_treated as f64;
        self.control_uses.iter().map(|&k| k as f64 / m).collect()
    }

    pub fn weighted_controls(&self) -> f64 {
        self.control_weights().iter().sum()
    }
}

/// Lower Cholesky factor of the pooled covariance, naming the covariate whose
/// pivot collapses.
fn whitening_factor(data: &MatchData) -> Result<Vec<Vec<f64>>> {
    let p = data.names.len();
    let n = data.len();
    if n < 2 {
        return Err(Error::EmptySample("matching needs at least two rows".into()));
    }
    let mean: Vec<f64> = (0..p)
        .map(|j| data.covariates.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut s = vec![vec![0.0; p]; p];
    for row in &data.covariates {
        for a in 0..p {
            let da = row[a] - mean[a];
            for b in 0..=a {
                s[a][b] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..=a {
            s[a][b] /= (n - 1) as f64;
            s[b][a] = s[a][b];
        }
    }
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        let pivot = s[i][i] - (0..i).map(|k| l[i][k] * l[i][k]).sum::<f64>();
        if !(s[i][i] > 0.0) || pivot <= SINGULAR_TOLERANCE * s[i][i] {
            return Err(Error::SingularCovariance {
                covariate: data.names[i].clone(),
            });
        }
        l[i][i] = pivot.sqrt();
        for r in (i + 1)..p {
            let v = s[r][i] - (0..i).map(|k| l[r][k] * l[i][k]).sum::<f64>();
            l[r][i] = v / l[i][i];
        }
    }
    Ok(l)
}

fn whiten(l: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let p = x.len();
    let mut z = vec![0.0; p];
    for i in 0..p {
        let s = x[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>();
        z[i] = s / l[i][i];
    }
    z
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest candidates to `z`, ties to the lower row index.
fn nearest(z: &[f64], white: &[Vec<f64>], candidates: &[usize], k: usize, skip: impl Fn(usize) -> bool) -> Vec<(f64, usize)> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for &c in candidates {
        if skip(c) {
            continue;
        }
        let d = dist2(z, &white[c]);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        // candidates arrive in increasing index order, so equal distances
        // keep the earlier row ahead
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, c));
        best.truncate(k);
    }
    best
}

fn candidate_lists(data: &MatchData, want_treated: bool) -> Vec<(Option<i64>, Vec<usize>)> {
    let rows = (0..data.len()).filter(|&r| data.treated[r] == want_treated);
    match &data.block {
        None => vec![(None, rows.collect())],
        Some(b) => {
            let mut keys: Vec<i64> = b.clone();
            keys.sort_unstable();
            keys.dedup();
            let all: Vec<usize> = rows.collect();
            keys.into_iter()
                .map(|k| (Some(k), all.iter().copied().filter(|&r| b[r] == k).collect()))
                .collect()
        }
    }
}

fn pool_for<'a>(lists: &'a [(Option<i64>, Vec<usize>)], data: &MatchData, row: usize) -> &'a [usize] {
    let key = data.block.as_ref().map(|b| b[row]);
    lists
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v.as_slice())
        .unwrap_or(&[])
}

/// Match every treated row to its nearest controls under the pooled-covariance
/// Mahalanobis metric.
pub fn mahalanobis_match(data: &MatchData, spec: &MatchSpec) -> Result<MatchedSample> {
    let k = spec.matches.max(1);
    let treated: Vec<usize> = (0..data.len()).filter(|&r| data.treated[r]).collect();
    let n_controls = data.len() - treated.len();
    if treated.is_empty() {
        return Err(Error::NoTreated);
    }
    if n_controls == 0 {
        return Err(Error::NoControls);
    }
    let l = whitening_factor(data)?;
    let white: Vec<Vec<f64>> = data.covariates.par_iter().map(|x| whiten(&l, x)).collect();
    let controls = candidate_lists(data, false);

    let found: Vec<Vec<(f64, usize)>> = if spec.with_replacement {
        treated
            .par_iter()
            .map(|&t| nearest(&white[t], &white, pool_for(&controls, data, t), k, |_| false))
            .collect()
    } else {
        let mut used = vec![false; data.len()];
        let mut out = Vec::with_capacity(treated.len());
        for &t in &treated {
            let best = nearest(&white[t], &white, pool_for(&controls, data, t), k, |c| used[c]);
            for &(_, c) in &best {
                used[c] = true;
            }
            out.push(best);
        }
        out
    };

    let mut pairs = Vec::with_capacity(treated.len() * k);
    let mut control_uses = vec![0usize; data.len()];
    for (&t, best) in treated.iter().zip(&found) {
        if best.len() < k {
            return Err(Error::NoControls);
        }
        for &(d, c) in best {
            control_uses[c] += 1;
            pairs.push(MatchPair {
                treated: t,
                control: c,
                distance: d.sqrt(),
            });
        }
    }
    let distinct_controls = control_uses.iter().filter(|&&u| u > 0).count();
    Ok(MatchedSample {
        matches_per_treated: k,
        pairs,
        control_uses,
        counts: MatchCounts {
            raw: data.len(),
            treated: treated.len(),
            controls: n_controls,
            matched_treated: treated.len(),
            distinct_controls,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atet {
    pub coefficient: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub treated: usize,
}

/// Average treatment effect on the treated with the matched-pairs variance
/// `[sum_T (d_i - tau)^2 + sum_C K_j (K_j - 1) / M^2 * s2_j] / N_T^2`, where
/// `s2_j` is half the squared outcome gap between control `j` and its
/// nearest fellow control.
pub fn estimate_atet(data: &MatchData, matched: &MatchedSample) -> Result<Atet> {
    let k = matched.matches_per_treated;
    if matched.pairs.is_empty() {
        return Err(Error::EmptySample("no matched pairs".into()));
    }
    let diffs: Vec<f64> = matched
        .pairs
        .chunks(k)
        .map(|group| {
            let t = group[0].treated;
            let yc = group.iter().map(|p| data.outcome[p.control]).sum::<f64>() / k as f64;
            data.outcome[t] - yc
        })
        .collect();
    let n_t = diffs.len() as f64;
    let tau = diffs.iter().sum::<f64>() / n_t;
    let heterogeneity: f64 = diffs.iter().map(|d| (d - tau).powi(2)).sum();

    let reused: Vec<usize> = (0..data.len()).filter(|&j| matched.control_uses[j] > 1).collect();
    let reuse_term: f64 = if reused.is_empty() {
        0.0
    } else {
        let l = whitening_factor(data)?;
        let white: Vec<Vec<f64>> = data.covariates.par_iter().map(|x| whiten(&l, x)).collect();
        let controls = candidate_lists(data, false);
        reused
            .par_iter()
            .map(|&j| {
                let nn = nearest(&white[j], &white, pool_for(&controls, data, j), 1, |c| c == j);
                let s2 = nn.first().map_or(0.0, |&(_, c)| 0.5 * (data.outcome[j] - data.outcome[c]).powi(2));
                let kj = matched.control_uses[j] as f64;
                kj * (kj - 1.0) / (k * k) as f64 * s2
            })
            .sum()
    };
    let var = (heterogeneity + reuse_term) / (n_t * n_t);
    let se = var.sqrt();
    let z = tau / se;
    Ok(Atet {
        coefficient: tau,
        std_error: se,
        z,
        p_value: z_two_sided(z),
        treated: diffs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub std_diff_raw: f64,
    pub std_diff_matched: f64,
    pub var_ratio_raw: f64,
    pub var_ratio_matched: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub rows: Vec<BalanceRow>,
}

fn std_diff(mt: f64, vt: f64, mc: f64, vc: f64) -> f64 {
    let pooled = ((vt + vc) / 2.0).sqrt();
    if pooled == 0.0 {
        if mt == mc {
            0.0
        } else {
            f64::INFINITY.copysign(mt - mc)
        }
    } else {
        (mt - mc) / pooled
    }
}

fn var_ratio(vt: f64, vc: f64) -> f64 {
    if vt == 0.0 && vc == 0.0 {
        1.0
    } else {
        vt / vc
    }
}

/// Standardized differences and variance ratios before and after matching;
/// matched controls enter with their frequency weights.
pub fn balance_report(data: &MatchData, matched: &MatchedSample) -> BalanceReport {
    let raw_c: Vec<f64> = data.treated.iter().map(|&t| if t { 0.0 } else { 1.0 }).collect();
    let treat_w: Vec<f64> = data.treated.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let matched_w = matched.control_weights();
    let rows = data
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let x: Vec<f64> = data.covariates.iter().map(|r| r[j]).collect();
            let (mt, vt) = weighted_mean_var(&x, &treat_w);
            let (mc, vc) = weighted_mean_var(&x, &raw_c);
            let (mm, vm) = weighted_mean_var(&x, &matched_w);
            BalanceRow {
                covariate: name.clone(),
                std_diff_raw: std_diff(mt, vt, mc, vc),
                std_diff_matched: std_diff(mt, vt, mm, vm),
                var_ratio_raw: var_ratio(vt, vc),
                var_ratio_matched: var_ratio(vt, vm),
            }
        })
        .collect();
    BalanceReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: &[(&[f64], bool, f64)]) -> MatchData {
        let p = rows[0].0.len();
        MatchData::new(
            (0..p).map(|j| format!("x{j}")).collect(),
            rows.iter().map(|r| r.0.to_vec()).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_pair_matches_at_zero() {
        let d = data(&[
            (&[1.0, 2.0], true, 5.0),
            (&[1.0, 2.0], false, 3.0),
            (&[4.0, 0.0], false, 0.0),
            (&[0.0, 5.0], false, 1.0),
        ]);
        let m = mahalanobis_match(&d, &MatchSpec::new(&["x0", "x1"])).unwrap();
        assert_eq!(m.pairs[0].control, 1);
        assert_eq!(m.pairs[0].distance, 0.0);
        let atet = estimate_atet(&d, &m).unwrap();
        assert_eq!(atet.coefficient, 2.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let d = data(&[(&[0.0], false, 0.0), (&[1.0], true, 0.0), (&[2.0], false, 0.0)]);
        let m = mahalanobis_match(&d, &MatchSpec::new(&["x0"])).unwrap();
        assert_eq!(m.pairs[0].control, 0);
    }

    #[test]
    fn collinear_covariates_are_singular() {
        let d = data(&[
            (&[1.0, 2.0], true, 0.0),
            (&[2.0, 4.0], false, 0.0),
            (&[3.0, 6.0], false, 0.0),
        ]);
        match mahalanobis_match(&d, &MatchSpec::new(&["x0", "x1"])) {
            Err(Error::SingularCovariance { covariate }) => assert_eq!(covariate, "x1"),
            other => panic!("expected SingularCovariance, got {other:?}"),
        }
    }

    #[test]
    fn missing_groups() {
        let d = data(&[(&[1.0], true, 0.0), (&[2.0], true, 0.0)]);
        assert!(matches!(mahalanobis_match(&d, &MatchSpec::new(&["x0"])), Err(Error::NoControls)));
        let d = data(&[(&[1.0], false, 0.0), (&[2.0], false, 0.0)]);
        assert!(matches!(mahalanobis_match(&d, &MatchSpec::new(&["x0"])), Err(Error::NoTreated)));
    }

    #[test]
    fn self_match_gives_zero_effect_and_perfect_balance() {
        let xs = [0.3, 1.7, -0.4, 2.2];
        let mut rows = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            rows.push((vec![x, (i * i) as f64], true, x * 3.0));
        }
        for (i, &x) in xs.iter().enumerate() {
            rows.push((vec![x, (i * i) as f64], false, x * 3.0));
        }
        let d = MatchData::new(
            vec!["a".into(), "b".into()],
            rows.iter().map(|r| r.0.clone()).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
        )
        .unwrap();
        let m = mahalanobis_match(&d, &MatchSpec::new(&["a", "b"])).unwrap();
        assert_eq!(estimate_atet(&d, &m).unwrap().coefficient, 0.0);
        for row in balance_report(&d, &m).rows {
            assert_eq!(row.std_diff_matched, 0.0);
            assert_eq!(row.var_ratio_matched, 1.0);
        }
    }

    #[test]
    fn without_replacement_uses_each_control_once() {
        let d = data(&[
            (&[0.0], true, 1.0),
            (&[0.1], true, 1.0),
            (&[0.05], false, 0.0),
            (&[5.0], false, 0.0),
        ]);
        let mut spec = MatchSpec::new(&["x0"]);
        spec.with_replacement = false;
        let m = mahalanobis_match(&d, &spec).unwrap();
        assert_eq!(m.pairs[0].control, 2);
        assert_eq!(m.pairs[1].control, 3);
        assert!(m.control_uses.iter().all(|&u| u <= 1));
    }

    #[test]
    fn blocking_restricts_candidates() {
        let mut d = data(&[(&[0.0], true, 1.0), (&[0.0], false, 0.0), (&[9.0], false, 0.0)]);
        d.block = Some(vec![2020, 2019, 2020]);
        let m = mahalanobis_match(&d, &MatchSpec::new(&["x0"])).unwrap();
        assert_eq!(m.pairs[0].control, 2);
    }

    #[test]
    fn counts_and_weights() {
        let d = data(&[
            (&[0.0], true, 4.0),
            (&[0.1], true, 6.0),
            (&[0.05], false, 1.0),
            (&[5.0], false, 2.0),
        ]);
        let m = mahalanobis_match(&d, &MatchSpec::new(&["x0"])).unwrap();
        assert_eq!(m.counts.matched_treated, 2);
        assert_eq!(m.weighted_controls(), 2.0);
        assert_eq!(m.control_uses[2], 2);
        let atet = estimate_atet(&d, &m).unwrap();
        assert_eq!(atet.coefficient, 4.0);
        // d = (3, 5), tau = 4: heterogeneity 2; control 2 used twice with
        // nearest fellow control at outcome 2: s2 = 0.5, weight 2
        assert!((atet.std_error - ((2.0 + 1.0) / 4.0f64).sqrt()).abs() < 1e-12);
    }
}
