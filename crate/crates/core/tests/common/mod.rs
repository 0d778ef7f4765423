//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use incentive_core::ingest::generators::GeneratorRecord;
use incentive_core::ingest::Month;
use incentive_core::matching::MatchData;
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Q = BigRational;

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().expect("finite rational")
}

/// Exact least squares by Gaussian elimination on the normal equations.
pub fn exact_ols(cols: &[Vec<Q>], y: &[Q]) -> Vec<Q> {
    let k = cols.len();
    let dot = |a: &[Q], b: &[Q]| a.iter().zip(b).fold(Q::zero(), |s, (x, y)| s + x * y);
    let mut m: Vec<Vec<Q>> = (0..k)
        .map(|i| {
            let mut row: Vec<Q> = (0..k).map(|j| dot(&cols[i], &cols[j])).collect();
            row.push(dot(&cols[i], y));
            row
        })
        .collect();
    for c in 0..k {
        let p = (c..k).find(|&r| !m[r][c].is_zero()).expect("full rank");
        m.swap(c, p);
        let pivot = m[c][c].clone();
        for v in m[c].iter_mut() {
            *v = &*v / &pivot;
        }
        for r in 0..k {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                let src = m[c].clone();
                for (v, s) in m[r].iter_mut().zip(src) {
                    *v = &*v - &f * s;
                }
            }
        }
    }
    m.into_iter().map(|row| row[k].clone()).collect()
}

/// Exact residual of `y` after least squares on `cols`.
pub fn exact_residual(cols: &[Vec<Q>], y: &[Q]) -> Vec<Q> {
    let b = exact_ols(cols, y);
    (0..y.len())
        .map(|r| {
            let fit = cols.iter().zip(&b).fold(Q::zero(), |s, (c, b)| s + &c[r] * b);
            &y[r] - fit
        })
        .collect()
}

/// Nearest control for every treated row by exhaustive search under the
/// inverse sample covariance, ties to the lowest index.
pub fn brute_force_nearest(data: &MatchData) -> Vec<(usize, usize)> {
    let n = data.len();
    let p = data.names.len();
    let x = DMatrix::from_fn(n, p, |r, c| data.covariates[r][c]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, p, |r, c| x[(r, c)] - mean[c]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let inv = cov.try_inverse().expect("invertible covariance");
    let mut out = Vec::new();
    for t in (0..n).filter(|&r| data.treated[r]) {
        let mut best: Option<(f64, usize)> = None;
        for c in (0..n).filter(|&r| !data.treated[r]) {
            let d = DVector::from_fn(p, |j, _| x[(t, j)] - x[(c, j)]);
            let d2 = (d.transpose() * &inv * &d)[(0, 0)];
            if best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, c));
            }
        }
        out.push((t, best.expect("a control exists").1));
    }
    out
}

/// Random monthly inventory: units move from applicant phases into
/// operation and some later retire or leave service. Capacities are whole
/// megawatts.
pub fn generator_fixture(units: usize, months: usize, seed: u64) -> Vec<GeneratorRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = Month::new(2016, 1).unwrap();
    let fuels = ["NG", "SUN", "WND", "COL", "NUC"];
    let mut out = Vec::new();
    for u in 0..units {
        let fuel = fuels[rng.random_range(0..fuels.len())];
        let mw = rng.random_range(1..900) as f64;
        let enter = if rng.random_bool(0.4) { 0 } else { rng.random_range(0..months) };
        let leave = if rng.random_bool(0.3) {
            rng.random_range(enter..months + 1)
        } else {
            months
        };
        let last_status = ["RE", "OS"][rng.random_range(0..2)];
        for m in 0..months {
            let status = if m < enter {
                ["P", "L", "T", "U", "V", "TS"][rng.random_range(0..6)]
            } else if m < leave {
                ["OP", "OP", "OP", "SB", "OA"][rng.random_range(0..5)]
            } else {
                last_status
            };
            out.push(GeneratorRecord {
                generator_id: format!("G{u}"),
                plant_id: format!("P{}", u / 3),
                month: m0.offset(m as i64),
                capacity_mw: mw,
                status: status.into(),
                fuel_code: fuel.into(),
                balancing_authority: Some("ERCO".into()),
                latitude: None,
                longitude: None,
                first_operation_date: None,
                retirement_date: None,
            });
        }
    }
    out
}
