//! Text and CSV rendering of result tables.

use std::path::Path;

use incentive_core::gsls::{stars, EffectsTable};
use incentive_core::linalg::Estimate;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Fixed-point number with thousands separators and an ASCII minus; empty
/// for NaN.
pub fn number(x: f64, decimals: usize) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{:.*}", decimals, x.abs());
    let (int, frac) = s.split_once('.').map_or((s.as_str(), None), |(i, f)| (i, Some(f)));
    let mut grouped = String::with_capacity(int.len() + int.len() / 3);
    for (k, ch) in int.chars().enumerate() {
        if k > 0 && (int.len() - k) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    let negative = x < 0.0 && s.chars().any(|c| c.is_ascii_digit() && c != '0');
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&grouped);
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    out
}

/// Coefficient with significance stars, e.g. `-919.20***`.
pub fn starred(coef: f64, p: f64, decimals: usize) -> String {
    format!("{}{}", number(coef, decimals), stars(p))
}

/// Whitespace-aligned table: first column left-aligned, the rest right.
#[derive(Debug, Clone, Default)]
pub struct TextTable {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl TextTable {
    pub fn new(title: &str, headers: &[&str]) -> Self {
        Self {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let cols = self.headers.len();
        let mut width = vec![0; cols];
        for row in std::iter::once(&self.headers).chain(&self.rows) {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |row: &[String]| {
            let cells: Vec<String> = (0..cols)
                .map(|c| {
                    let cell = row.get(c).map(String::as_str).unwrap_or("");
                    if c == 0 {
                        format!("{cell:<w$}", w = width[c])
                    } else {
                        format!("{cell:>w$}", w = width[c])
                    }
                })
                .collect();
            cells.join("  ").trim_end().to_string()
        };
        let total: usize = width.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
        let mut out = String::new();
        if !self.title.is_empty() {
            out.push_str(&self.title);
            out.push('\n');
        }
        out.push_str(&"=".repeat(total));
        out.push('\n');
        out.push_str(&line(&self.headers));
        out.push('\n');
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out.push_str(&"=".repeat(total));
        out.push('\n');
        for n in &self.notes {
            out.push_str(n);
            out.push('\n');
        }
        out
    }
}

pub const STAR_NOTE: &str = "* p<0.05; ** p<0.01; *** p<0.001";

/// One row of the unstyled effects CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRecord {
    pub outcome: String,
    pub cause: String,
    pub kind: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

pub fn effect_records(table: &EffectsTable) -> Vec<EffectRecord> {
    let mut out = Vec::new();
    for eq in &table.equations {
        for row in &eq.rows {
            for (kind, e) in [("direct", row.direct), ("total", row.total)] {
                if let Some(e) = e {
                    out.push(EffectRecord {
                        outcome: eq.outcome.clone(),
                        cause: row.cause.clone(),
                        kind: kind.into(),
                        coef: e.coef,
                        se: e.se,
                        t: e.t,
                        p: e.p,
                    });
                }
            }
        }
    }
    out
}

fn estimate_cells(e: Option<Estimate>) -> [String; 2] {
    match e {
        Some(e) => [starred(e.coef, e.p, 3), format!("({})", number(e.se, 3))],
        None => [String::new(), String::new()],
    }
}

/// Direct and total columns per outcome equation, standard errors in
/// parentheses.
pub fn effects_text(table: &EffectsTable, title: &str) -> String {
    let mut out = String::new();
    for eq in &table.equations {
        let mut t = TextTable::new(
            &format!("{title}: {}", eq.outcome),
            &["", "Direct", "(SE)", "Total", "(SE)"],
        );
        for row in &eq.rows {
            let [d, ds] = estimate_cells(row.direct);
            let [g, gs] = estimate_cells(row.total);
            t.push(vec![row.cause.clone(), d, ds, g, gs]);
        }
        t.push(vec!["Observations".into(), number(eq.observations as f64, 0), String::new(), number(eq.observations as f64, 0)]);
        t.push(vec!["R2".into(), number(eq.r2_direct, 3), String::new(), number(eq.r2_total, 3)]);
        t.push(vec!["Adjusted R2".into(), number(eq.adj_r2_direct, 3), String::new(), number(eq.adj_r2_total, 3)]);
        t.notes.push(STAR_NOTE.into());
        out.push_str(&t.render());
        out.push('\n');
    }
    out
}

pub fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    for r in records {
        w.serialize(r).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_use_ascii_minus_and_separators() {
        assert_eq!(number(-919.2, 2), "-919.20");
        assert_eq!(number(125_860.1, 1), "125,860.1");
        assert_eq!(number(-1_234_567.0, 0), "-1,234,567");
        assert_eq!(number(-0.0001, 2), "0.00");
        assert_eq!(number(f64::NAN, 2), "");
        assert_eq!(starred(-919.2, 0.0009, 2), "-919.20***");
    }

    #[test]
    fn stars_at_thresholds() {
        assert_eq!(starred(1.0, 0.049, 1), "1.0*");
        assert_eq!(starred(1.0, 0.0099, 1), "1.0**");
        assert_eq!(starred(1.0, 0.05, 1), "1.0");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let recs = vec![
            EffectRecord {
                outcome: "gen".into(),
                cause: "incentive".into(),
                kind: "direct".into(),
                coef: -34.131_000_000_000_1,
                se: 0.1 + 0.2,
                t: f64::MIN_POSITIVE,
                p: 1e-300,
            },
            EffectRecord {
                outcome: "gen".into(),
                cause: "pool, lagged".into(),
                kind: "total".into(),
                coef: 1.0 / 3.0,
                se: 2.0,
                t: -7.5,
                p: 0.5,
            },
        ];
        write_csv(&path, &recs).unwrap();
        let back: Vec<EffectRecord> = read_csv(&path).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn table_aligns_columns() {
        let mut t = TextTable::new("T", &["", "a"]);
        t.push(vec!["long name".into(), "1".into()]);
        t.push(vec!["x".into(), "-22.5".into()]);
        let s = t.render();
        assert!(s.contains("long name      1\n"));
        assert!(s.contains("x          -22.5\n"));
    }
}
