//! Polygon boundaries for geographic fallback assignment.
//!
//! File format: one vertex per line as `lon lat` or `lon,lat`; a blank line
//! starts a new polygon; `#` begins a comment. A point is inside the boundary
//! if it falls inside any polygon.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    polygons: Vec<Vec<(f64, f64)>>,
}

impl Boundary {
    pub fn new(polygons: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if polygons.is_empty() || polygons.iter().any(|p| p.len() < 3) {
            return Err(Error::InvalidInput("a boundary needs polygons of at least three vertices".into()));
        }
        Ok(Self { polygons })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut polygons = Vec::new();
        let mut current = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                // comment-only lines do not end a polygon
                if raw.trim().is_empty() && !current.is_empty() {
                    polygons.push(std::mem::take(&mut current));
                }
                continue;
            }
            let parts: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
            match parsed.as_deref() {
                Some(&[lon, lat]) => current.push((lon, lat)),
                _ => return Err(Error::parse(path, i as u64 + 1, format!("expected `lon lat`, got `{line}`"))),
            }
        }
        if !current.is_empty() {
            polygons.push(current);
        }
        if let Some(bad) = polygons.iter().position(|p| p.len() < 3) {
            return Err(Error::parse(path, 0, format!("polygon {} has fewer than three vertices", bad + 1)));
        }
        Self::new(polygons)
    }

    /// Even-odd ray casting against each polygon.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.polygons.iter().any(|poly| {
            let mut inside = false;
            let mut j = poly.len() - 1;
            for i in 0..poly.len() {
                let (xi, yi) = poly[i];
                let (xj, yj) = poly[j];
                if (yi > lat) != (yj > lat) && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi {
                    inside = !inside;
                }
                j = i;
            }
            inside
        })
    }
}
