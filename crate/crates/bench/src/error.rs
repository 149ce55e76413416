use std::path::PathBuf;

use thiserror::Error;
use wrcast_core::CoreError;
use wrcast_nn::NnError;
use wrcast_stats::StatsError;
use wrcast_theory::TheoryError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Training,
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            BenchError::Config(_) | BenchError::Nn(NnError::Config(_)) => ErrorClass::Config,
            BenchError::Training(_)
            | BenchError::Nn(NnError::Training { .. })
            | BenchError::Stats(StatsError::Training { .. })
            | BenchError::Stats(StatsError::Convergence { .. }) => ErrorClass::Training,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
