//! Estimation toolkit for capacity-incentive markets: equilibrium analysis of
//! paired subsidy/tax schemes, recursive structural systems estimated by
//! Gram-Schmidt least squares, data ingestion, covariate matching and
//! robustness checks.

pub mod equilibrium;
pub mod error;
pub mod gsls;
pub mod ingest;
pub mod linalg;
pub mod matching;
pub mod robustness;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
