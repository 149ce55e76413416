use thiserror::Error;
use wrcast_core::CoreError;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("no convergence after {iterations} iterations (last loss {loss})")]
    Convergence { iterations: usize, loss: f64 },

    #[error("training failed at round {round}: {message}")]
    Training { round: usize, message: String },

    #[error("not identifiable: {0}")]
    Identifiability(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl StatsError {
    pub fn domain(msg: impl Into<String>) -> Self {
        StatsError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, StatsError>;
