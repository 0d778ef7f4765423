//! Command-line front end: argument parsing, configuration resolution and
//! dispatch to the estimation library.

pub mod commands;
pub mod config;
pub mod render;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use incentive_core::robustness::Filter;

use config::{RunConfig, DEFAULT_OUT, ECHO_FILE, OUT_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] incentive_core::Error),
    #[error("total-effect identity fails: scaled difference {0:.3e}")]
    Identity(f64),
}

impl CliError {
    /// 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Identity(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "incentive", version, about = "Scarcity-incentive impact estimation")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed for simulated draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Lag in months between incentive and outcome.
    #[arg(long, global = true)]
    pub lag: Option<usize>,
    /// Sample filters (storm_uri, payment_cap), comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_filter)]
    pub filters: Option<Vec<Filter>>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Clean the generator inventory and build the monthly panel.
    Ingest,
    /// Direct and total effects along the causal ordering.
    Estimate,
    /// Market equilibrium under paired and unpaired transfers.
    Equilibrium,
    /// Mahalanobis matching on interval data.
    Match,
    /// Interval price regression with autoregressive errors.
    Underbid,
    /// Specification sweep over lags, fixed effects and polynomial terms.
    Sweep,
    /// Covariate sequencing ladder.
    Ladder,
}

fn parse_filter(s: &str) -> Result<Filter, String> {
    match s.trim() {
        "storm_uri" => Ok(Filter::StormUri),
        "payment_cap" => Ok(Filter::PaymentCap),
        other => Err(format!("unknown filter `{other}`")),
    }
}

fn missing(section: &str) -> CliError {
    CliError::Input(format!("configuration has no [{section}] section"))
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

impl Cli {
    /// Configuration with command-line flags applied and all paths absolute.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let cwd = std::env::current_dir().map_err(|e| CliError::Input(e.to_string()))?;
        cfg.rebase(&cwd);
        let out = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or(cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        cfg.out = Some(absolute(&out));
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if let Some(seed) = cfg.seed {
            if let Some(e) = cfg.equilibrium.as_mut() {
                if let Some(d) = e.intervention.driver.as_mut() {
                    d.seed = seed;
                }
            }
        }
        if let Some(lag) = self.lag {
            for d in [
                cfg.estimate.as_mut().map(|c| &mut c.design),
                cfg.sweep.as_mut().map(|c| &mut c.design),
                cfg.ladder.as_mut().map(|c| &mut c.design),
            ]
            .into_iter()
            .flatten()
            {
                d.lag = lag;
            }
        }
        if let Some(f) = &self.filters {
            match self.command {
                Command::Estimate => cfg.estimate.as_mut().ok_or_else(|| missing("estimate"))?.filters = f.clone(),
                Command::Sweep => cfg.sweep.as_mut().ok_or_else(|| missing("sweep"))?.filters = f.clone(),
                Command::Match => cfg.matching.as_mut().ok_or_else(|| missing("match"))?.filters = f.clone(),
                Command::Underbid => cfg.underbid.as_mut().ok_or_else(|| missing("underbid"))?.spec.filters = f.clone(),
                Command::Ladder => {
                    let c = cfg.ladder.as_mut().ok_or_else(|| missing("ladder"))?;
                    if f.contains(&Filter::PaymentCap) {
                        return Err(CliError::Input("the payment_cap filter applies to interval data only".into()));
                    }
                    if f.contains(&Filter::StormUri) {
                        let m = Filter::storm_uri_month();
                        if !c.design.exclude_source_months.contains(&m) {
                            c.design.exclude_source_months.push(m);
                        }
                    }
                }
                Command::Ingest | Command::Equilibrium => {
                    return Err(CliError::Input("--filters does not apply to this command".into()))
                }
            }
        }
        Ok(cfg)
    }
}

/// Run one command against a resolved configuration, writing outputs and the
/// configuration echo into its output directory.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    render::write_text(&out.join(ECHO_FILE), &cfg.to_toml()?)?;
    match command {
        Command::Ingest => commands::ingest(cfg.ingest.as_ref().ok_or_else(|| missing("ingest"))?, &out),
        Command::Estimate => commands::estimate(cfg.estimate.as_ref().ok_or_else(|| missing("estimate"))?, &out),
        Command::Equilibrium => {
            commands::equilibrium(cfg.equilibrium.as_ref().ok_or_else(|| missing("equilibrium"))?, &out)
        }
        Command::Match => commands::matching(cfg.matching.as_ref().ok_or_else(|| missing("match"))?, &out),
        Command::Underbid => commands::underbid(cfg.underbid.as_ref().ok_or_else(|| missing("underbid"))?, &out),
        Command::Sweep => commands::run_sweep(cfg.sweep.as_ref().ok_or_else(|| missing("sweep"))?, &out),
        Command::Ladder => commands::ladder(cfg.ladder.as_ref().ok_or_else(|| missing("ladder"))?, &out),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.resolve().and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
