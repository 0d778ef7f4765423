//! Fuel categories and the code-to-category lookup table.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_MAP: &str = include_str!("../../data/fuel_map.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FuelCategory {
    #[serde(rename = "NG")]
    NaturalGas,
    Renewables,
    Other,
}

impl FuelCategory {
    pub const ALL: [FuelCategory; 3] = [FuelCategory::NaturalGas, FuelCategory::Renewables, FuelCategory::Other];

    pub fn label(self) -> &'static str {
        match self {
            FuelCategory::NaturalGas => "NG",
            FuelCategory::Renewables => "Renewables",
            FuelCategory::Other => "Other",
        }
    }

    /// Lower-case token used in panel column names.
    pub fn slug(self) -> &'static str {
        match self {
            FuelCategory::NaturalGas => "ng",
            FuelCategory::Renewables => "renewables",
            FuelCategory::Other => "other",
        }
    }
}

impl fmt::Display for FuelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FuelCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ng" | "natural gas" => Ok(FuelCategory::NaturalGas),
            "renewables" | "renewable" => Ok(FuelCategory::Renewables),
            "other" => Ok(FuelCategory::Other),
            other => Err(Error::InvalidInput(format!("unknown fuel category `{other}`"))),
        }
    }
}

/// Case-insensitive map from fuel or technology codes to categories.
/// Unlisted codes fall into `Other`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuelMap {
    map: HashMap<String, FuelCategory>,
}

impl Default for FuelMap {
    fn default() -> Self {
        Self::parse(DEFAULT_MAP, Path::new("<builtin fuel map>")).expect("bundled fuel map parses")
    }
}

impl FuelMap {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut map = HashMap::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
            let (Some(code), Some(cat)) = (row.get(0), row.get(1)) else {
                return Err(Error::parse(path, line, "expected `code,category`"));
            };
            let cat = cat.parse().map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
            map.insert(code.trim().to_ascii_lowercase(), cat);
        }
        Ok(Self { map })
    }

    pub fn insert(&mut self, code: &str, category: FuelCategory) {
        self.map.insert(code.trim().to_ascii_lowercase(), category);
    }

    pub fn category(&self, code: &str) -> FuelCategory {
        self.map
            .get(&code.trim().to_ascii_lowercase())
            .copied()
            .unwrap_or(FuelCategory::Other)
    }
}
