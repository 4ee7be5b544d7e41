use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::cache::CacheError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver did not converge: {0}")]
    Solver(String),

    #[error("{failed} of {total} properties violated")]
    Property { failed: usize, total: usize },

    #[error("budget refused: {0}")]
    Budget(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// The JSON record printed on standard error before a nonzero exit.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Output {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) | Self::Output { .. } => "config",
            Self::Cache(_) => "cache",
            Self::Solver(_) => "solver",
            Self::Property { .. } => "property",
            Self::Budget(_) => "budget",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Output { .. } | Self::Cache(_) => 1,
            Self::Solver(_) => 2,
            Self::Property { .. } => 3,
            Self::Budget(_) => 4,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            code: self.exit_code(),
            message: self.to_string(),
        }
    }
}

impl From<bec_core::Error> for CliError {
    fn from(e: bec_core::Error) -> Self {
        use bec_core::Error as E;
        let msg = e.to_string();
        match e {
            E::BudgetExceeded { .. } => Self::Budget(msg),
            E::Domain(_) | E::GridMismatch(_) => Self::Config(msg),
            E::NotConverged { .. }
            | E::SingularMatching { .. }
            | E::NonFiniteState { .. }
            | E::DegenerateEnvelope
            | E::EmptyWindow => Self::Solver(msg),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
