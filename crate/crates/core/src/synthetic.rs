//! Seeded synthetic data with known parameters, used by the recovery tests
//! and the bundled demo fixtures.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::ingest::intervals::{GRID_MINUTES, INCENTIVE};
use crate::ingest::{IntervalTable, Month, Panel};
use crate::matching::MatchData;

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    Normal::new(0.0, sd).expect("positive sd").sample(rng)
}

/// Confounded treatment on a discrete covariate grid: units with larger
/// `x1` are more often treated and have higher outcomes. The outcome is
/// `2 x1 + x2 + tau T + e`, so matching on the grid recovers `tau`.
pub fn confounded_matching(n: usize, tau: f64, seed: u64) -> Result<MatchData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut covariates = Vec::with_capacity(n);
    let mut treated = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.random_range(0..8) as f64;
        let x2 = rng.random_range(0..4) as f64;
        let p = 1.0 / (1.0 + (-(0.6 * x1 - 0.3 * x2 - 2.5)).exp());
        let t = rng.random_bool(p);
        let y = 2.0 * x1 + x2 + if t { tau } else { 0.0 } + normal(&mut rng, 1.0);
        covariates.push(vec![x1, x2]);
        treated.push(t);
        outcome.push(y);
    }
    MatchData::new(vec!["x1".into(), "x2".into()], covariates, treated, outcome)
}

/// Parameters of the simulated price equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceDgp {
    pub active_effect: f64,
    pub payment_effect: f64,
    /// AR(1) coefficient of the price error on the interval grid.
    pub rho: f64,
    pub noise_sd: f64,
}

impl Default for PriceDgp {
    fn default() -> Self {
        Self {
            active_effect: -50.0,
            payment_effect: -0.2,
            rho: 0.0,
            noise_sd: 5.0,
        }
    }
}

/// Interval table carrying every column of the default underbidding
/// specification. The incentive fires when utilization is high, with a
/// payment that grows with utilization.
pub fn underbid_intervals(n: usize, dgp: PriceDgp, seed: u64) -> Result<IntervalTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2019, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    let ts = (0..n as i64).map(|k| start + Duration::minutes(GRID_MINUTES * k)).collect();
    let mut t = IntervalTable::new(ts);
    let col = |sd: f64, mean: f64, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| mean + normal(rng, sd)).collect() };
    let cap = [col(500.0, 50_000.0, &mut rng), col(800.0, 30_000.0, &mut rng), col(300.0, 10_000.0, &mut rng)];
    let temp = col(8.0, 0.0, &mut rng);
    let wind = col(2.0, 6.0, &mut rng);
    let gas = col(0.5, 3.0, &mut rng);
    let supply = [col(2_000.0, 25_000.0, &mut rng), col(3_000.0, 12_000.0, &mut rng), col(500.0, 5_000.0, &mut rng)];
    let reserves = col(1_500.0, 8_000.0, &mut rng);
    let util: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
    let incentive: Vec<f64> = util
        .iter()
        .map(|&u| {
            if u > 0.85 && rng.random_bool(0.8) {
                (u - 0.8) * 800.0 * rng.random_range(0.2..2.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut e = 0.0;
    let innov = dgp.noise_sd * (1.0 - dgp.rho * dgp.rho).sqrt();
    let price: Vec<f64> = (0..n)
        .map(|r| {
            e = dgp.rho * e + normal(&mut rng, innov);
            let active = if incentive[r] > 0.0 { 1.0 } else { 0.0 };
            20.0 + 0.0004 * cap[0][r] - 0.0002 * cap[1][r] + 0.3 * temp[r] + 0.02 * temp[r] * temp[r] - 0.5 * wind[r]
                + 4.0 * gas[r]
                + 0.001 * supply[0][r]
                - 0.0005 * reserves[r]
                + 30.0 * util[r]
                + dgp.active_effect * active
                + dgp.payment_effect * incentive[r]
                + e
        })
        .collect();
    let sq = temp.iter().map(|x| x * x).collect();
    for (name, v) in [
        ("capacity_ng", cap[0].clone()),
        ("capacity_renewables", cap[1].clone()),
        ("capacity_other", cap[2].clone()),
        ("temperature", temp),
        ("temperature_sq", sq),
        ("wind_speed", wind),
        ("gas_price", gas),
        ("supply_ng", supply[0].clone()),
        ("supply_renewables", supply[1].clone()),
        ("supply_other", supply[2].clone()),
        ("reserves", reserves),
        ("capacity_utilization", util),
        (INCENTIVE, incentive),
        ("energy_price", price),
    ] {
        t.insert(name, v)?;
    }
    Ok(t)
}

/// Monthly panel in which the incentive is independent of both capacity
/// outcomes and all series are white noise.
pub fn null_panel(months: usize, seed: u64) -> Result<Panel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = Month::new(2015, 7)?;
    let mut p = Panel::new((0..months as i64).map(|k| m0.offset(k)).collect());
    for name in ["temperature", "gas_price", "incentive", "gen_ng", "gen_renewables"] {
        p.insert(name, (0..months).map(|_| normal(&mut rng, 1.0)).collect())?;
    }
    Ok(p)
}

/// Monthly panel with a recursive chain temperature, gas price ->
/// incentive -> applicant pool -> generating capacity, on which lagged
/// designs have known direct effects at `lag`.
pub fn structural_panel(months: usize, lag: usize, seed: u64) -> Result<Panel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = Month::new(2015, 7)?;
    let mut p = Panel::new((0..months as i64).map(|k| m0.offset(k)).collect());
    let temp: Vec<f64> = (0..months)
        .map(|i| 8.0 * (i as f64 * std::f64::consts::TAU / 12.0).sin() + normal(&mut rng, 1.0))
        .collect();
    let gas: Vec<f64> = (0..months).map(|_| 3.0 + normal(&mut rng, 0.5)).collect();
    let incentive: Vec<f64> = (0..months)
        .map(|i| (2.0 + 0.3 * temp[i] - 0.5 * gas[i] + normal(&mut rng, 1.0)).max(0.0))
        .collect();
    let pool: Vec<f64> = (0..months).map(|i| 500.0 + 40.0 * incentive[i] + normal(&mut rng, 20.0)).collect();
    let gen: Vec<f64> = (0..months)
        .map(|t| {
            let s = t.saturating_sub(lag);
            40_000.0 + 2.0 * pool[s] - 30.0 * incentive[s] + 10.0 * temp[s] + normal(&mut rng, 50.0)
        })
        .collect();
    p.insert("temperature", temp)?;
    p.insert("gas_price", gas)?;
    p.insert("incentive", incentive)?;
    p.insert("pool_ng", pool)?;
    p.insert("gen_ng", gen)?;
    Ok(p)
}
