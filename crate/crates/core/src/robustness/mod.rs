//! Robustness analyses: the underbidding regression with optional lagged-error
//! terms, covariate-sequencing ladders, extreme-event filters and the
//! lag/fixed-effect sweep.

pub mod ladder;
pub mod sweep;
pub mod underbid;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{IntervalTable, Month};

pub use ladder::{canonical_ladder, covariate_sequencing, LadderRow, LadderStep};
pub use sweep::{sweep, FeSet, SweepGrid, SweepResult, SweepRow};
pub use underbid::{ar_gls_fit, underbid_fit, UnderbidResult, UnderbidSpec, AR1_HORIZONS, AR10_HORIZONS};

/// Total payment (price plus incentive) above which intervals are dropped by
/// [`Filter::PaymentCap`].
pub const PAYMENT_CAP: f64 = 7000.0;

/// Extreme-event exclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    /// Every interval in February 2021.
    StormUri,
    /// Intervals whose price plus incentive exceeds [`PAYMENT_CAP`].
    PaymentCap,
}

impl Filter {
    pub fn storm_uri_month() -> Month {
        Month { year: 2021, month: 2 }
    }

    /// Rows to keep.
    pub fn keep(&self, table: &IntervalTable, price: &str, incentive: &str) -> Result<Vec<bool>> {
        Ok(match self {
            Filter::StormUri => table
                .timestamps()
                .iter()
                .map(|t| !(t.year() == 2021 && t.month() == 2))
                .collect(),
            Filter::PaymentCap => {
                let p = table.column(price)?;
                let i = table.column(incentive)?;
                p.iter().zip(i).map(|(p, i)| !(p + i > PAYMENT_CAP)).collect()
            }
        })
    }
}

/// Conjunction of several filters.
pub fn keep_mask(table: &IntervalTable, filters: &[Filter], price: &str, incentive: &str) -> Result<Vec<bool>> {
    let mut keep = vec![true; table.len()];
    for f in filters {
        for (k, f) in keep.iter_mut().zip(f.keep(table, price, incentive)?) {
            *k &= f;
        }
    }
    Ok(keep)
}
