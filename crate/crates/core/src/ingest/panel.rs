//! Monthly panels: one row per month, named numeric columns.
//!
//! CSV layout: a `month` column (YYYY-MM) followed by numeric columns; the
//! empty string marks a missing value.

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;

use super::generators::csv_error;
use super::{format_number, parse_number, Month};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    months: Vec<Month>,
    columns: IndexMap<String, Vec<f64>>,
}

impl Panel {
    pub fn new(months: Vec<Month>) -> Self {
        Self {
            months,
            columns: IndexMap::new(),
        }
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
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

    /// Add or replace a column.
    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.months.len() {
            return Err(Error::InvalidInput(format!(
                "column `{name}` has {} values for {} months",
                values.len(),
                self.months.len()
            )));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    /// Join another panel's columns on month; months missing from `other`
    /// become missing values.
    pub fn merge(&mut self, other: &Panel) -> Result<()> {
        for (name, values) in &other.columns {
            let col = self
                .months
                .iter()
                .map(|m| match other.months.iter().position(|o| o == m) {
                    Some(i) => values[i],
                    None => f64::NAN,
                })
                .collect();
            self.insert(name.clone(), col)?;
        }
        Ok(())
    }

    /// Subtract the full-sample mean (ignoring missing values) from a column.
    pub fn center(&mut self, name: &str) -> Result<f64> {
        let col = self
            .columns
            .get_mut(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        let present: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
        let mean = crate::stats::mean(&present);
        for x in col.iter_mut() {
            *x -= mean;
        }
        Ok(mean)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
        if headers.get(0).map(str::trim) != Some("month") {
            return Err(Error::parse(path, 1, "first column must be `month`"));
        }
        let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut months = Vec::new();
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for row in rdr.records() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let month: Month = row[0]
                .parse()
                .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
            if months.last().is_some_and(|&prev| prev >= month) {
                return Err(Error::parse(path, line, format!("month {month} is not after the previous row")));
            }
            months.push(month);
            for (k, col) in data.iter_mut().enumerate() {
                let v = parse_number(&row[k + 1])
                    .map_err(|msg| Error::parse(path, line, format!("column `{}`: {msg}", names[k])))?;
                col.push(v);
            }
        }
        let mut panel = Panel::new(months);
        for (name, col) in names.into_iter().zip(data) {
            panel.insert(name, col)?;
        }
        Ok(panel)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["month".to_string()];
        header.extend(self.columns.keys().cloned());
        wtr.write_record(&header)?;
        for (i, m) in self.months.iter().enumerate() {
            let mut row = vec![m.to_string()];
            row.extend(self.columns.values().map(|c| format_number(c[i])));
            wtr.write_record(&row)?;
        }
        wtr.flush()
    }
}

/// Average a daily series into months. Missing days are filled from the
/// latest earlier observation in the same month; a month with no leading
/// observation to fill from, or with no observation at all, is an error.
pub fn monthly_from_daily(dates: &[NaiveDate], values: &[f64]) -> Result<Vec<(Month, f64)>> {
    if dates.len() != values.len() {
        return Err(Error::InvalidInput("dates and values differ in length".into()));
    }
    let mut out: Vec<(Month, f64)> = Vec::new();
    let mut i = 0;
    while i < dates.len() {
        let month = Month::new(dates[i].year(), dates[i].month())?;
        let start = i;
        while i < dates.len() && dates[i].year() == month.year && dates[i].month() == month.month {
            if i > start && dates[i] <= dates[i - 1] {
                return Err(Error::InvalidInput(format!("dates not increasing at {}", dates[i])));
            }
            i += 1;
        }
        if let Some(&(prev, _)) = out.last() {
            if month.ordinal() != prev.ordinal() + 1 {
                return Err(Error::InvalidInput(format!("no observations between {prev} and {month}")));
            }
        }
        let mut last = f64::NAN;
        let mut sum = 0.0;
        let mut n = 0usize;
        for k in start..i {
            if !values[k].is_nan() {
                last = values[k];
            }
            if last.is_nan() {
                return Err(Error::InvalidInput(format!(
                    "{} is missing with nothing earlier in {month} to fill from",
                    dates[k]
                )));
            }
            sum += last;
            n += 1;
        }
        out.push((month, sum / n as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn months(n: usize) -> Vec<Month> {
        let m0 = Month::new(2015, 7).unwrap();
        (0..n as i64).map(|k| m0.offset(k)).collect()
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let mut p = Panel::new(months(4));
        p.insert("a", vec![0.1 + 0.2, f64::NAN, -1e-17, 3.0]).unwrap();
        p.insert("b", vec![1.0 / 3.0, 2.0, 1e300, -0.5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        p.write_csv(&path).unwrap();
        let q = Panel::read_csv(&path).unwrap();
        assert_eq!(q.months(), p.months());
        for name in ["a", "b"] {
            let (x, y) = (p.get(name).unwrap(), q.get(name).unwrap());
            assert!(x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())));
        }
    }

    #[test]
    fn bad_cell_names_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "month,x\n2016-01,1\n2016-02,oops\n").unwrap();
        let err = Panel::read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("bad.csv:3"), "{err}");
        assert!(err.contains("`x`"), "{err}");
    }

    #[test]
    fn daily_fill_stays_within_month() {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        let dates = [d(2016, 1, 1), d(2016, 1, 2), d(2016, 1, 3), d(2016, 2, 1)];
        let out = monthly_from_daily(&dates, &[1.0, f64::NAN, 4.0, 2.0]).unwrap();
        assert_eq!(out[0].1, 2.0);
        assert_eq!(out[1].1, 2.0);
        // a missing first day cannot borrow from the previous month
        assert!(monthly_from_daily(&dates, &[1.0, 1.0, 1.0, f64::NAN]).is_err());
        // a whole missing month is a gap
        assert!(monthly_from_daily(&[d(2016, 1, 1), d(2016, 3, 1)], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn centering_removes_mean() {
        let mut p = Panel::new(months(3));
        p.insert("t", vec![10.0, f64::NAN, 20.0]).unwrap();
        assert_eq!(p.center("t").unwrap(), 15.0);
        assert_eq!(p.get("t").unwrap()[0], -5.0);
    }
}
