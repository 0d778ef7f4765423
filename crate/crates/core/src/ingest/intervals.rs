//! Fifteen-minute real-time market data.
//!
//! CSV layout: a `timestamp` column (`YYYY-MM-DD HH:MM[:SS]` or ISO `T`
//! separated) followed by numeric columns, empty string for missing. The
//! conventional column names are `energy_price`, `incentive`,
//! `capacity_utilization` (fraction), supplies and capacities in GW,
//! `reserves`, `temperature`, `temperature_sq`, `wind_speed`, `gas_price`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::generators::csv_error;
use super::{format_number, parse_number};
use crate::error::{Error, Result};

pub const GRID_MINUTES: i64 = 15;
pub const INCENTIVE: &str = "incentive";
pub const UTILIZATION: &str = "capacity_utilization";

const FORMATS: [&str; 4] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"];

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalTable {
    timestamps: Vec<NaiveDateTime>,
    columns: IndexMap<String, Vec<f64>>,
}

impl IntervalTable {
    pub fn new(timestamps: Vec<NaiveDateTime>) -> Self {
        Self {
            timestamps,
            columns: IndexMap::new(),
        }
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.get(name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.timestamps.len() {
            return Err(Error::InvalidInput(format!(
                "column `{name}` has {} values for {} intervals",
                values.len(),
                self.timestamps.len()
            )));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    /// Rows where `keep` is true.
    pub fn filter(&self, keep: &[bool]) -> Self {
        let pick = |v: &[f64]| v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
        Self {
            timestamps: self
                .timestamps
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(t, _)| *t)
                .collect(),
            columns: self.columns.iter().map(|(n, v)| (n.clone(), pick(v))).collect(),
        }
    }

    /// Position of each timestamp, for lag lookups.
    pub fn index(&self) -> HashMap<NaiveDateTime, usize> {
        self.timestamps.iter().enumerate().map(|(i, &t)| (t, i)).collect()
    }

    /// Add `year`, `month`, `day`, `hour` and `minute` columns.
    pub fn add_calendar(&mut self) {
        let ts = &self.timestamps;
        let field = |f: fn(&NaiveDateTime) -> f64| ts.iter().map(f).collect::<Vec<f64>>();
        let cols = [
            ("year", field(|t| t.year() as f64)),
            ("month", field(|t| t.month() as f64)),
            ("day", field(|t| t.day() as f64)),
            ("hour", field(|t| t.hour() as f64)),
            ("minute", field(|t| t.minute() as f64)),
        ];
        for (name, col) in cols {
            self.columns.insert(name.to_string(), col);
        }
    }

    /// Check the grid and value ranges. Returns the number of gaps (missing
    /// grid points between consecutive rows).
    pub fn validate(&self) -> Result<usize> {
        let mut gaps = 0;
        for (i, t) in self.timestamps.iter().enumerate() {
            if t.second() != 0 || t.minute() as i64 % GRID_MINUTES != 0 {
                return Err(Error::InvalidInput(format!("{t} is not on the {GRID_MINUTES}-minute grid")));
            }
            if i > 0 {
                let step = (*t - self.timestamps[i - 1]).num_minutes();
                if step <= 0 {
                    return Err(Error::InvalidInput(format!("timestamps not increasing at {t}")));
                }
                if step > GRID_MINUTES {
                    gaps += 1;
                }
            }
        }
        if let Some(inc) = self.get(INCENTIVE) {
            if let Some(i) = inc.iter().position(|&x| x < 0.0) {
                return Err(Error::InvalidInput(format!("negative incentive at {}", self.timestamps[i])));
            }
        }
        if let Some(u) = self.get(UTILIZATION) {
            if let Some(i) = u.iter().position(|&x| !(x > 0.0 && x <= 1.0) && !x.is_nan()) {
                return Err(Error::InvalidInput(format!(
                    "capacity utilization {} outside (0, 1] at {}",
                    u[i], self.timestamps[i]
                )));
            }
        }
        Ok(gaps)
    }

    /// Attach a five-minute series as a fifteen-minute column: each interval
    /// `t` gets the mean of the values at `t`, `t+5` and `t+10`.
    pub fn attach_five_minute(&mut self, name: &str, series: &[(NaiveDateTime, f64)]) -> Result<()> {
        let lookup: HashMap<NaiveDateTime, f64> = series.iter().copied().collect();
        let five = chrono::Duration::minutes(5);
        let col = self
            .timestamps
            .iter()
            .map(|&t| {
                let get = |k: i32| {
                    lookup
                        .get(&(t + five * k))
                        .copied()
                        .ok_or_else(|| Error::InvalidInput(format!("five-minute `{name}` missing at {}", t + five * k)))
                };
                Ok((get(0)? + get(1)? + get(2)?) / 3.0)
            })
            .collect::<Result<Vec<f64>>>()?;
        self.insert(name, col)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
        if headers.get(0).map(str::trim) != Some("timestamp") {
            return Err(Error::parse(path, 1, "first column must be `timestamp`"));
        }
        let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut ts = Vec::new();
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for row in rdr.records() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let t = parse_timestamp(&row[0])
                .ok_or_else(|| Error::parse(path, line, format!("bad timestamp `{}`", &row[0])))?;
            ts.push(t);
            for (k, col) in data.iter_mut().enumerate() {
                let v = parse_number(&row[k + 1])
                    .map_err(|msg| Error::parse(path, line, format!("column `{}`: {msg}", names[k])))?;
                col.push(v);
            }
        }
        let mut table = Self::new(ts);
        for (n, c) in names.into_iter().zip(data) {
            table.insert(n, c)?;
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.keys().cloned());
        wtr.write_record(&header)?;
        for (i, t) in self.timestamps.iter().enumerate() {
            let mut row = vec![t.format("%Y-%m-%d %H:%M").to_string()];
            row.extend(self.columns.values().map(|c| format_number(c[i])));
            wtr.write_record(&row)?;
        }
        wtr.flush()
    }
}

/// Read a two-column `timestamp,value` five-minute series.
pub fn read_five_minute(path: &Path) -> Result<Vec<(NaiveDateTime, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() < 2 {
            return Err(Error::parse(path, line, "expected `timestamp,value`"));
        }
        let t = parse_timestamp(&row[0]).ok_or_else(|| Error::parse(path, line, format!("bad timestamp `{}`", &row[0])))?;
        let v = parse_number(&row[1]).map_err(|m| Error::parse(path, line, m))?;
        out.push((t, v));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub count: usize,
    /// One per summary column; missing values are skipped.
    pub means: Vec<f64>,
}

/// Column means for all intervals and split by whether the incentive is
/// positive. The first column is the active share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub columns: Vec<String>,
    pub all: GroupMeans,
    pub inactive: GroupMeans,
    /// Absent when no interval has a positive incentive.
    pub active: Option<GroupMeans>,
}

impl StateSummary {
    pub fn active_share(&self) -> f64 {
        self.all.means[0]
    }

    pub fn mean(&self, column: &str) -> Option<(f64, f64, Option<f64>)> {
        let k = self.columns.iter().position(|c| c == column)?;
        Some((self.all.means[k], self.inactive.means[k], self.active.as_ref().map(|a| a.means[k])))
    }
}

fn group_means(columns: &[&[f64]], rows: &[usize]) -> GroupMeans {
    let means = columns
        .iter()
        .map(|col| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for &r in rows {
                if !col[r].is_nan() {
                    sum += col[r];
                    n += 1;
                }
            }
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect();
    GroupMeans {
        count: rows.len(),
        means,
    }
}

pub fn summarize_by_incentive_state(table: &IntervalTable) -> Result<StateSummary> {
    let incentive = table.column(INCENTIVE)?;
    let active: Vec<f64> = incentive.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
    let mut names = vec!["incentive_active".to_string()];
    let mut cols: Vec<&[f64]> = vec![&active];
    for (n, c) in &table.columns {
        names.push(n.clone());
        cols.push(c);
    }
    let all: Vec<usize> = (0..table.len()).collect();
    let (on, off): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&r| active[r] > 0.0);
    Ok(StateSummary {
        columns: names,
        all: group_means(&cols, &all),
        inactive: group_means(&cols, &off),
        active: (!on.is_empty()).then(|| group_means(&cols, &on)),
    })
}
