//! Small statistical helpers shared by the estimators.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
pub fn t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_nan() || dof <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Two-sided p-value of a standard normal z statistic.
pub fn z_two_sided(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z.is_infinite() {
        return 0.0;
    }
    let dist = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * dist.sf(z.abs())).min(1.0)
}

/// Standard normal cumulative distribution.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n-1 denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Frequency-weighted mean and variance (denominator `sum(w) - 1`).
pub fn weighted_mean_var(xs: &[f64], weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    if total <= 1.0 {
        return (m, f64::NAN);
    }
    let ss = xs
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - m).powi(2))
        .sum::<f64>();
    (m, ss / (total - 1.0))
}

/// Sample covariance of two equally long series (n-1 denominator).
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return f64::NAN;
    }
    let ma = mean(&a[..n]);
    let mb = mean(&b[..n]);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1) as f64
}
