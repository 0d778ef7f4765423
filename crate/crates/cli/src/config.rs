//! Run configuration: one TOML file with a section per subcommand. Relative
//! paths are resolved against the directory of the file.

use std::path::{Path, PathBuf};

use incentive_core::equilibrium::{Intervention, Regime};
use incentive_core::ingest::DesignSpec;
use incentive_core::matching::MatchSpec;
use incentive_core::robustness::{Filter, LadderStep, SweepGrid, UnderbidSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Output directory override.
pub const OUT_ENV: &str = "INCENTIVE_OUT";
pub const DEFAULT_OUT: &str = "out";
/// Name of the resolved-config echo written next to every run's outputs.
pub const ECHO_FILE: &str = "resolved.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumConfig>,
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub underbid: Option<UnderbidConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    /// Monthly generator inventory.
    pub generators: PathBuf,
    /// Balancing-authority polygon used when plant records cannot fill a
    /// missing code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuel_map: Option<PathBuf>,
    #[serde(default = "default_authority")]
    pub authority: String,
    /// Monthly panels merged into the capacity panel.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub panels: Vec<PathBuf>,
    /// 15-minute interval table to summarize.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<PathBuf>,
    /// 5-minute incentive series averaged onto the interval grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub five_minute_incentive: Option<PathBuf>,
}

fn default_authority() -> String {
    "ERCO".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub panel: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<Filter>,
    pub design: DesignSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    /// Inverse demand intercept.
    pub a: f64,
    /// Inverse demand slope (positive).
    pub b: f64,
    /// Marginal cost at zero output.
    pub c: f64,
    /// Slope of marginal cost.
    #[serde(default)]
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub market: MarketConfig,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<Regime>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    pub intervention: Intervention,
}

fn default_regimes() -> Vec<Regime> {
    vec![Regime::Monopoly, Regime::Competitive]
}

fn default_draws() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    pub intervals: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<Filter>,
    pub spec: MatchSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnderbidConfig {
    pub intervals: PathBuf,
    #[serde(default)]
    pub spec: UnderbidSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub panel: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<Filter>,
    pub design: DesignSpec,
    pub grid: SweepGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub panel: PathBuf,
    pub design: DesignSpec,
    /// Defaults to the cumulative ladder over the design's groups.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<LadderStep>,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.rebase(&base);
        Ok(cfg)
    }

    /// Make every relative path relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let Some(o) = self.out.as_mut() {
            rebase(base, o);
        }
        if let Some(c) = self.ingest.as_mut() {
            rebase(base, &mut c.generators);
            for p in c
                .boundary
                .iter_mut()
                .chain(c.fuel_map.iter_mut())
                .chain(c.intervals.iter_mut())
                .chain(c.five_minute_incentive.iter_mut())
                .chain(c.panels.iter_mut())
            {
                rebase(base, p);
            }
        }
        if let Some(c) = self.estimate.as_mut() {
            rebase(base, &mut c.panel);
        }
        if let Some(c) = self.matching.as_mut() {
            rebase(base, &mut c.intervals);
        }
        if let Some(c) = self.underbid.as_mut() {
            rebase(base, &mut c.intervals);
        }
        if let Some(c) = self.sweep.as_mut() {
            rebase(base, &mut c.panel);
        }
        if let Some(c) = self.ladder.as_mut() {
            rebase(base, &mut c.panel);
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Input(format!("cannot serialize configuration: {e}")))
    }
}
