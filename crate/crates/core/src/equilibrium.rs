//! Partial-equilibrium solver for monopoly and competitive markets under
//! per-unit subsidies and taxes.
//!
//! Every intervention is routed through the party that physically pays or
//! receives it. A consumer-side transfer shifts the posted price the firm
//! faces; a firm-side transfer changes the firm's receipts directly. The
//! solvers only ever see the resulting posted-price and receipt schedules, so
//! bearer invariance and the cancellation of a paired tax and subsidy are
//! outcomes of the computation rather than shortcuts inside it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_cdf;

/// Absolute tolerance on the first-order-condition residual.
pub const FOC_TOLERANCE: f64 = 1e-12;

const MAX_ITERATIONS: usize = 500;
const MAX_BRACKET_DOUBLINGS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Monopoly,
    Competitive,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "monopoly" => Ok(Regime::Monopoly),
            "competitive" => Ok(Regime::Competitive),
            other => Err(Error::InvalidInput(format!("unknown regime `{other}`"))),
        }
    }
}

/// A tabulated curve on a grid of quantities with values and first
/// derivatives, interpolated by a monotonicity-preserving cubic Hermite spline.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    q: Vec<f64>,
    value: Vec<f64>,
    slope: Vec<f64>,
}

impl TabulatedCurve {
    pub fn new(q: Vec<f64>, value: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        if q.len() < 2 || q.len() != value.len() || q.len() != slope.len() {
            return Err(Error::InvalidPrimitives(
                "tabulated curve needs at least two points with matching value and slope".into(),
            ));
        }
        if q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPrimitives(
                "tabulated quantities must be strictly increasing".into(),
            ));
        }
        if q.iter().chain(&value).chain(&slope).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPrimitives("tabulated curve contains non-finite values".into()));
        }
        let slope = limit_slopes(&q, &value, slope);
        Ok(Self { q, value, slope })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.q[0], self.q[self.q.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        match self.q.partition_point(|&node| node <= x) {
            0 => 0,
            i if i >= self.q.len() => self.q.len() - 2,
            i => i - 1,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let h = self.q[k + 1] - self.q[k];
        let t = (x - self.q[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.value[k] + h10 * h * self.slope[k] + h01 * self.value[k + 1] + h11 * h * self.slope[k + 1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let h = self.q[k + 1] - self.q[k];
        let t = (x - self.q[k]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.value[k] + d10 * self.slope[k] + d01 * self.value[k + 1] + d11 * self.slope[k + 1]
    }

    fn is_strictly_decreasing(&self) -> bool {
        self.value.windows(2).all(|w| w[1] < w[0]) && self.slope.iter().all(|&s| s <= 0.0)
    }
}

/// Fritsch-Carlson limiter applied to user-supplied node derivatives.
fn limit_slopes(q: &[f64], value: &[f64], mut slope: Vec<f64>) -> Vec<f64> {
    for k in 0..q.len() - 1 {
        let secant = (value[k + 1] - value[k]) / (q[k + 1] - q[k]);
        if secant == 0.0 {
            slope[k] = 0.0;
            slope[k + 1] = 0.0;
            continue;
        }
        if slope[k] * secant < 0.0 {
            slope[k] = 0.0;
        }
        if slope[k + 1] * secant < 0.0 {
            slope[k + 1] = 0.0;
        }
        let alpha = slope[k] / secant;
        let beta = slope[k + 1] / secant;
        let radius = alpha * alpha + beta * beta;
        if radius > 9.0 {
            let tau = 3.0 / radius.sqrt();
            slope[k] = tau * alpha * secant;
            slope[k + 1] = tau * beta * secant;
        }
    }
    slope
}

/// Inverse demand P(Q).
#[derive(Debug, Clone, PartialEq)]
pub enum Demand {
    /// P(Q) = intercept - slope * Q
    Linear { intercept: f64, slope: f64 },
    Tabulated(TabulatedCurve),
}

/// Marginal cost C'(Q).
#[derive(Debug, Clone, PartialEq)]
pub enum Cost {
    /// C(Q) = marginal * Q
    Linear { marginal: f64 },
    /// C(Q) = marginal * Q + curvature * Q^2 / 2
    Quadratic { marginal: f64, curvature: f64 },
    /// Tabulated marginal cost with its slope C''(Q).
    Tabulated(TabulatedCurve),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketPrimitives {
    pub demand: Demand,
    pub cost: Cost,
}

impl MarketPrimitives {
    /// Linear inverse demand `a - bQ` with constant marginal cost `c`.
    pub fn linear(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(
            Demand::Linear {
                intercept: a,
                slope: b,
            },
            Cost::Linear { marginal: c },
        )
    }

    /// Linear inverse demand with rising marginal cost `c + dQ`.
    pub fn quadratic(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(
            Demand::Linear {
                intercept: a,
                slope: b,
            },
            Cost::Quadratic {
                marginal: c,
                curvature: d,
            },
        )
    }

    pub fn new(demand: Demand, cost: Cost) -> Result<Self> {
        let prim = Self { demand, cost };
        prim.validate()?;
        Ok(prim)
    }

    pub fn validate(&self) -> Result<()> {
        let base_cost = match &self.cost {
            Cost::Linear { marginal } => {
                if !(marginal.is_finite() && *marginal >= 0.0) {
                    return Err(Error::InvalidPrimitives(format!(
                        "marginal cost must be finite and non-negative, got {marginal}"
                    )));
                }
                Some(*marginal)
            }
            Cost::Quadratic {
                marginal,
                curvature,
            } => {
                if !(marginal.is_finite() && *marginal >= 0.0 && curvature.is_finite() && *curvature >= 0.0) {
                    return Err(Error::InvalidPrimitives(format!(
                        "quadratic cost needs c >= 0 and d >= 0, got c={marginal}, d={curvature}"
                    )));
                }
                Some(*marginal)
            }
            Cost::Tabulated(curve) => {
                if curve.value.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidPrimitives("tabulated marginal cost must be non-negative".into()));
                }
                None
            }
        };
        match &self.demand {
            Demand::Linear { intercept, slope } => {
                if !(slope.is_finite() && *slope > 0.0) {
                    return Err(Error::InvalidPrimitives(format!(
                        "inverse demand slope must be strictly positive (P'(Q) < 0), got b={slope}"
                    )));
                }
                if !intercept.is_finite() {
                    return Err(Error::InvalidPrimitives("demand intercept must be finite".into()));
                }
                if let Some(c) = base_cost {
                    if *intercept <= c {
                        return Err(Error::InvalidPrimitives(format!(
                            "demand intercept a={intercept} must exceed marginal cost c={c}"
                        )));
                    }
                }
            }
            Demand::Tabulated(curve) => {
                if !curve.is_strictly_decreasing() {
                    return Err(Error::InvalidPrimitives(
                        "tabulated inverse demand must be strictly decreasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn price(&self, q: f64) -> f64 {
        match &self.demand {
            Demand::Linear { intercept, slope } => intercept - slope * q,
            Demand::Tabulated(curve) => curve.value(q),
        }
    }

    pub fn price_slope(&self, q: f64) -> f64 {
        match &self.demand {
            Demand::Linear { slope, .. } => -slope,
            Demand::Tabulated(curve) => curve.derivative(q),
        }
    }

    pub fn marginal_cost(&self, q: f64) -> f64 {
        match &self.cost {
            Cost::Linear { marginal } => *marginal,
            Cost::Quadratic {
                marginal,
                curvature,
            } => marginal + curvature * q,
            Cost::Tabulated(curve) => curve.value(q),
        }
    }

    /// Inverted own-price elasticity `eta = 1/epsilon = P'(Q) Q / P(Q)`.
    pub fn inverse_elasticity(&self, q: f64) -> f64 {
        self.price_slope(q) * q / self.price(q)
    }

    /// Closed-form coefficients `(a, b, c, d)` when both curves are in the
    /// built-in linear family.
    fn linear_coefficients(&self) -> Option<(f64, f64, f64, f64)> {
        let (a, b) = match self.demand {
            Demand::Linear { intercept, slope } => (intercept, slope),
            Demand::Tabulated(_) => return None,
        };
        let (c, d) = match self.cost {
            Cost::Linear { marginal } => (marginal, 0.0),
            Cost::Quadratic {
                marginal,
                curvature,
            } => (marginal, curvature),
            Cost::Tabulated(_) => return None,
        };
        Some((a, b, c, d))
    }

    /// Admissible quantity bracket: `[0, choke quantity]` for linear demand,
    /// the intersection of the tabulated domains otherwise. The boolean flags
    /// whether the curves may be extrapolated beyond the upper end.
    fn bracket(&self) -> (f64, f64, bool) {
        let mut lo: f64 = 0.0;
        let mut hi = f64::INFINITY;
        let mut extrapolable = true;
        match &self.demand {
            Demand::Linear { intercept, slope } => hi = hi.min(intercept / slope),
            Demand::Tabulated(curve) => {
                let (a, b) = curve.domain();
                lo = lo.max(a);
                hi = hi.min(b);
                extrapolable = false;
            }
        }
        if let Cost::Tabulated(curve) = &self.cost {
            let (a, b) = curve.domain();
            lo = lo.max(a);
            hi = hi.min(b);
            extrapolable = false;
        }
        (lo, hi, extrapolable)
    }
}

/// Which party physically pays or receives a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bearer {
    Firm,
    Consumer,
}

impl Bearer {
    pub fn swapped(self) -> Self {
        match self {
            Bearer::Firm => Bearer::Consumer,
            Bearer::Consumer => Bearer::Firm,
        }
    }
}

/// Per-unit transfer as a function of the driver value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    Fixed { amount: f64 },
    /// `scale * max(0, x - threshold)`
    Relu { scale: f64, threshold: f64 },
    /// `cap / (1 + exp(-steepness * (x - midpoint)))`
    Logistic { cap: f64, midpoint: f64, steepness: f64 },
    /// Scarcity adder `cap * (1 - Phi((x - mean) / sd))`, with `x` read as
    /// available reserves.
    Scarcity { cap: f64, mean: f64, sd: f64 },
}

impl Schedule {
    pub fn fixed(amount: f64) -> Self {
        Schedule::Fixed { amount }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match *self {
            Schedule::Fixed { amount } => amount,
            Schedule::Relu { scale, threshold } => scale * (x - threshold).max(0.0),
            Schedule::Logistic {
                cap,
                midpoint,
                steepness,
            } => cap / (1.0 + (-steepness * (x - midpoint)).exp()),
            Schedule::Scarcity { cap, mean, sd } => cap * (1.0 - normal_cdf((x - mean) / sd)),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Schedule::Fixed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DriverKind {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Ar1 { mean: f64, rho: f64, sd: f64 },
}

/// Seeded stochastic driver series `X_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub kind: DriverKind,
    pub seed: u64,
}

impl Driver {
    pub fn path(&self, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.kind {
            DriverKind::Normal { mean, sd } => {
                let dist = Normal::new(mean, sd).expect("finite normal parameters");
                (0..len).map(|_| dist.sample(&mut rng)).collect()
            }
            DriverKind::Uniform { lo, hi } => (0..len).map(|_| rng.random_range(lo..hi)).collect(),
            DriverKind::Ar1 { mean, rho, sd } => {
                let dist = Normal::new(0.0, sd).expect("finite normal parameters");
                let mut level = 0.0;
                (0..len)
                    .map(|_| {
                        level = rho * level + dist.sample(&mut rng);
                        mean + level
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub schedule: Schedule,
    pub bearer: Bearer,
}

/// A subsidy (received by `bearer`) and a tax (paid by `bearer`), both
/// evaluated on the same realized driver path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Intervention {
    pub subsidy: Option<Transfer>,
    pub tax: Option<Transfer>,
    pub driver: Option<Driver>,
}

/// Transfers realized at one driver value, split by the side of the market
/// they act on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedTransfers {
    pub subsidy: f64,
    pub tax: f64,
    /// Shift of the posted price relative to the consumer's effective price.
    pub consumer_shift: f64,
    /// Addition to the firm's per-unit receipts over the posted price.
    pub firm_shift: f64,
}

impl RealizedTransfers {
    pub fn net(&self) -> f64 {
        self.consumer_shift + self.firm_shift
    }
}

impl Intervention {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn subsidy(amount: f64) -> Self {
        Self {
            subsidy: Some(Transfer {
                schedule: Schedule::fixed(amount),
                bearer: Bearer::Firm,
            }),
            ..Self::default()
        }
    }

    pub fn tax(amount: f64) -> Self {
        Self {
            tax: Some(Transfer {
                schedule: Schedule::fixed(amount),
                bearer: Bearer::Consumer,
            }),
            ..Self::default()
        }
    }

    /// Buyer-paid incentive: the consumer pays `schedule` as a tax and the firm
    /// receives the identical amount as a subsidy.
    pub fn paired(schedule: Schedule, driver: Option<Driver>) -> Self {
        Self {
            subsidy: Some(Transfer {
                schedule: schedule.clone(),
                bearer: Bearer::Firm,
            }),
            tax: Some(Transfer {
                schedule,
                bearer: Bearer::Consumer,
            }),
            driver,
        }
    }

    pub fn is_paired(&self) -> bool {
        match (&self.subsidy, &self.tax) {
            (Some(s), Some(t)) => s.schedule == t.schedule,
            _ => false,
        }
    }

    pub fn swapped_bearers(&self) -> Self {
        let swap = |t: &Option<Transfer>| {
            t.as_ref().map(|t| Transfer {
                schedule: t.schedule.clone(),
                bearer: t.bearer.swapped(),
            })
        };
        Self {
            subsidy: swap(&self.subsidy),
            tax: swap(&self.tax),
            driver: self.driver,
        }
    }

    /// Driver values to evaluate: the seeded path, or a single placeholder
    /// draw when the intervention is deterministic.
    pub fn draws(&self, count: usize) -> Vec<f64> {
        match &self.driver {
            Some(driver) => driver.path(count),
            None => vec![0.0; count.max(1)],
        }
    }

    pub fn realize(&self, x: f64) -> RealizedTransfers {
        let mut out = RealizedTransfers {
            subsidy: 0.0,
            tax: 0.0,
            consumer_shift: 0.0,
            firm_shift: 0.0,
        };
        if let Some(s) = &self.subsidy {
            out.subsidy = s.schedule.evaluate(x);
            match s.bearer {
                // a subsidized consumer is willing to post a higher price
                Bearer::Consumer => out.consumer_shift += out.subsidy,
                Bearer::Firm => out.firm_shift += out.subsidy,
            }
        }
        if let Some(t) = &self.tax {
            out.tax = t.schedule.evaluate(x);
            match t.bearer {
                Bearer::Consumer => out.consumer_shift -= out.tax,
                Bearer::Firm => out.firm_shift -= out.tax,
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    RootFinder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSolution {
    pub quantity: f64,
    /// Effective per-unit cost to buyers, net of their own transfers.
    pub consumer_price: f64,
    /// Effective per-unit receipts of the firm.
    pub producer_price: f64,
    /// Price at which the trade is posted between the two parties.
    pub posted_price: f64,
    pub regime: Regime,
    pub converged: bool,
    pub residual: f64,
    pub method: SolveMethod,
}

fn foc(prim: &MarketPrimitives, regime: Regime, net: f64, q: f64) -> f64 {
    let receipts = prim.price(q) + net;
    match regime {
        Regime::Monopoly => receipts + prim.price_slope(q) * q - prim.marginal_cost(q),
        Regime::Competitive => receipts - prim.marginal_cost(q),
    }
}

fn finish(
    prim: &MarketPrimitives,
    regime: Regime,
    transfers: RealizedTransfers,
    quantity: f64,
    converged: bool,
    method: SolveMethod,
) -> EquilibriumSolution {
    let consumer_price = prim.price(quantity);
    let posted_price = consumer_price + transfers.consumer_shift;
    EquilibriumSolution {
        quantity,
        consumer_price,
        producer_price: posted_price + transfers.firm_shift,
        posted_price,
        regime,
        converged,
        residual: foc(prim, regime, transfers.net(), quantity).abs(),
        method,
    }
}

/// Solve one regime at already-realized transfers, using the closed form for
/// the linear family.
pub fn solve_realized(
    prim: &MarketPrimitives,
    regime: Regime,
    transfers: RealizedTransfers,
) -> Result<EquilibriumSolution> {
    prim.validate()?;
    let Some((a, b, c, d)) = prim.linear_coefficients() else {
        return solve_realized_numeric(prim, regime, transfers);
    };
    let net = transfers.net();
    let q = match regime {
        Regime::Monopoly => (a - c + net) / (2.0 * b + d),
        Regime::Competitive => (a - c + net) / (b + d),
    };
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::NoEquilibrium {
            lo: 0.0,
            hi: a / b,
        });
    }
    Ok(finish(prim, regime, transfers, q, true, SolveMethod::ClosedForm))
}

/// Bracketed root-finding on the first-order condition (bisection safeguarded
/// secant steps), regardless of the functional family.
pub fn solve_realized_numeric(
    prim: &MarketPrimitives,
    regime: Regime,
    transfers: RealizedTransfers,
) -> Result<EquilibriumSolution> {
    prim.validate()?;
    let net = transfers.net();
    let f = |q: f64| foc(prim, regime, net, q);
    let (mut lo, mut hi, extrapolable) = prim.bracket();
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if extrapolable {
        let mut doublings = 0;
        while f_lo * f_hi > 0.0 && f_hi > 0.0 && doublings < MAX_BRACKET_DOUBLINGS {
            hi *= 2.0;
            f_hi = f(hi);
            doublings += 1;
        }
    }
    if f_lo == 0.0 && lo > 0.0 {
        return Ok(finish(prim, regime, transfers, lo, true, SolveMethod::RootFinder));
    }
    if f_hi == 0.0 {
        return Ok(finish(prim, regime, transfers, hi, true, SolveMethod::RootFinder));
    }
    if f_lo * f_hi > 0.0 || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::NoEquilibrium { lo, hi });
    }

    let mut best = if f_lo.abs() < f_hi.abs() { lo } else { hi };
    let mut best_f = f(best);
    let mut last_width = hi - lo;
    for _ in 0..MAX_ITERATIONS {
        if best_f.abs() <= FOC_TOLERANCE {
            break;
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        // fall back to bisection whenever the secant leaves the bracket or the
        // bracket stopped shrinking fast enough
        let candidate = if secant > lo && secant < hi && width < 0.5 * last_width + f64::EPSILON {
            secant
        } else {
            0.5 * (lo + hi)
        };
        last_width = width;
        let f_c = f(candidate);
        if f_c.abs() < best_f.abs() {
            best = candidate;
            best_f = f_c;
        }
        if f_c == 0.0 {
            break;
        }
        if f_c.signum() == f_lo.signum() {
            lo = candidate;
            f_lo = f_c;
        } else {
            hi = candidate;
            f_hi = f_c;
        }
    }
    if best <= 0.0 {
        return Err(Error::NoEquilibrium { lo, hi });
    }
    let converged = best_f.abs() <= FOC_TOLERANCE || (hi - lo) <= 4.0 * f64::EPSILON * hi.abs().max(1.0);
    Ok(finish(prim, regime, transfers, best, converged, SolveMethod::RootFinder))
}

/// Solve at the first realization of the intervention's driver (or the fixed
/// amounts when it has none).
pub fn solve(prim: &MarketPrimitives, iv: &Intervention, regime: Regime) -> Result<EquilibriumSolution> {
    let x = iv.draws(1)[0];
    solve_realized(prim, regime, iv.realize(x))
}

pub fn solve_monopoly(prim: &MarketPrimitives, iv: &Intervention) -> Result<EquilibriumSolution> {
    solve(prim, iv, Regime::Monopoly)
}

pub fn solve_competitive(prim: &MarketPrimitives, iv: &Intervention) -> Result<EquilibriumSolution> {
    solve(prim, iv, Regime::Competitive)
}

/// One solved draw of a stochastic intervention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub draw: usize,
    pub driver: f64,
    pub transfers: RealizedTransfers,
    pub solution: EquilibriumSolution,
    /// `max(|Q - Q_E|, |P - P_E|)` against the no-intervention equilibrium.
    pub deviation: f64,
}

/// Solve the market at every draw of the intervention's driver path.
pub fn solve_path(
    prim: &MarketPrimitives,
    iv: &Intervention,
    regime: Regime,
    draws: usize,
) -> Result<Vec<PathPoint>> {
    let baseline = solve_realized(prim, regime, Intervention::none().realize(0.0))?;
    iv.draws(draws)
        .into_iter()
        .enumerate()
        .map(|(draw, x)| {
            let transfers = iv.realize(x);
            let solution = solve_realized(prim, regime, transfers)?;
            let deviation = (solution.quantity - baseline.quantity)
                .abs()
                .max((solution.consumer_price - baseline.consumer_price).abs());
            Ok(PathPoint {
                draw,
                driver: x,
                transfers,
                solution,
                deviation,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    pub max_quantity_deviation: f64,
    pub max_price_deviation: f64,
    pub draws: usize,
}

impl DeviationReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_quantity_deviation <= tol && self.max_price_deviation <= tol
    }
}

/// Supremum deviation of the paired-intervention equilibrium from the
/// no-intervention equilibrium over `draws` driver realizations.
pub fn verify_cancellation(
    prim: &MarketPrimitives,
    iv: &Intervention,
    regime: Regime,
    draws: usize,
) -> Result<DeviationReport> {
    if !iv.is_paired() {
        return Err(Error::NotPaired);
    }
    let path = solve_path(prim, iv, regime, draws)?;
    let baseline = solve_realized(prim, regime, Intervention::none().realize(0.0))?;
    Ok(sup_deviation(path.iter().map(|p| p.solution), |_| baseline))
}

/// Supremum deviation between an intervention and the same intervention with
/// every bearer swapped, draw by draw on the same driver path.
pub fn verify_neutrality(
    prim: &MarketPrimitives,
    iv: &Intervention,
    regime: Regime,
    draws: usize,
) -> Result<DeviationReport> {
    let swapped = iv.swapped_bearers();
    let xs = iv.draws(draws);
    let original = xs
        .iter()
        .map(|&x| solve_realized(prim, regime, iv.realize(x)))
        .collect::<Result<Vec<_>>>()?;
    let mirrored = xs
        .iter()
        .map(|&x| solve_realized(prim, regime, swapped.realize(x)))
        .collect::<Result<Vec<_>>>()?;
    Ok(sup_deviation(original.into_iter(), |i| mirrored[i]))
}

fn sup_deviation(
    solutions: impl Iterator<Item = EquilibriumSolution>,
    reference: impl Fn(usize) -> EquilibriumSolution,
) -> DeviationReport {
    let mut report = DeviationReport {
        max_quantity_deviation: 0.0,
        max_price_deviation: 0.0,
        draws: 0,
    };
    for (i, s) in solutions.enumerate() {
        let r = reference(i);
        report.max_quantity_deviation = report.max_quantity_deviation.max((s.quantity - r.quantity).abs());
        report.max_price_deviation = report
            .max_price_deviation
            .max((s.consumer_price - r.consumer_price).abs());
        report.draws += 1;
    }
    report
}

/// Share of a per-unit firm subsidy passed through to the consumer price,
/// `(P_E - P_S) / S`, computed from two solves.
pub fn pass_through(prim: &MarketPrimitives, subsidy: f64, regime: Regime) -> Result<f64> {
    if !(subsidy > 0.0) || !subsidy.is_finite() {
        return Err(Error::DegenerateSubsidy);
    }
    let base = solve_realized(prim, regime, Intervention::none().realize(0.0))?;
    let subsidized = solve_realized(prim, regime, Intervention::subsidy(subsidy).realize(0.0))?;
    Ok((base.consumer_price - subsidized.consumer_price) / subsidy)
}
