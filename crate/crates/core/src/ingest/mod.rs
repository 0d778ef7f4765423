//! Loading generator inventories and real-time market data, and turning them
//! into monthly panels, interval tables and regression designs.

pub mod boundary;
pub mod design;
pub mod fuel;
pub mod generators;
pub mod intervals;
pub mod panel;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use boundary::Boundary;
pub use design::{build_design, ColumnSpec, ControlGroup, DesignSpec, FixedEffects};
pub use fuel::{FuelCategory, FuelMap};
pub use generators::{
    detect_entry_exit, monthly_capacity, read_generators, resolve_balancing_authority, tabulate_entry_exit,
    EntryExit, EntryExitTable, EventKind, GeneratorEvent, GeneratorRecord, MonthlyCapacity, Resolution, Status,
};
pub use intervals::{summarize_by_incentive_state, IntervalTable, StateSummary};
pub use panel::Panel;

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    /// Months since year 0, handy for arithmetic.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    pub fn next(self) -> Self {
        self.offset(1)
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("expected YYYY-MM, got `{s}`"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        // accept a trailing day, as in 2016-03-01
        let m = m.split('-').next().unwrap_or(m);
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        Month::new(year, month)
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a numeric CSV field, treating the empty string as missing.
pub(crate) fn parse_number(field: &str) -> std::result::Result<f64, String> {
    let t = field.trim();
    if t.is_empty() {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"))
}

/// Render a float for CSV: shortest round-trip text, empty for missing.
pub(crate) fn format_number(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}
