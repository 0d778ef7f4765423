use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid market primitives: {0}")]
    InvalidPrimitives(String),

    #[error("no equilibrium: first-order condition has no sign change on [{lo}, {hi}]")]
    NoEquilibrium { lo: f64, hi: f64 },

    #[error("intervention is not paired: subsidy and tax schedules differ")]
    NotPaired,

    #[error("pass-through is undefined for a zero subsidy")]
    DegenerateSubsidy,

    #[error("design is rank deficient at column `{column}`")]
    RankDeficient { column: String },

    #[error("insufficient data: {rows} rows for {params} parameters")]
    InsufficientData { rows: usize, params: usize },

    #[error("regressor correlation {0} is too close to +/-1")]
    DegenerateCorrelation(f64),

    #[error("direct-effect table has no equation for `{outcome}` (needed for cause `{cause}`)")]
    IncompleteTable { cause: String, outcome: String },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("{count} records need a geographic fallback but no boundary file was supplied")]
    MissingBoundary { count: usize },

    #[error(
        "accounting identity failed for {category}: initial {initial} + entries {entries} - exits {exits} != final {final_total}"
    )]
    AccountingMismatch {
        category: String,
        initial: f64,
        entries: f64,
        exits: f64,
        final_total: f64,
    },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("covariate covariance matrix is singular; consider dropping `{covariate}`")]
    SingularCovariance { covariate: String },

    #[error("no control observations available for matching")]
    NoControls,

    #[error("no treated observations available for matching")]
    NoTreated,

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of the numerics (singular systems, missing roots) as
    /// opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoEquilibrium { .. }
                | Error::DegenerateSubsidy
                | Error::RankDeficient { .. }
                | Error::InsufficientData { .. }
                | Error::DegenerateCorrelation(_)
                | Error::SingularCovariance { .. }
                | Error::AccountingMismatch { .. }
        )
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
