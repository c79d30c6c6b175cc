use thiserror::Error;

use crate::solver::TraceRow;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("output not in space: {0}")]
    OutputNotInSpace(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Weights became non-finite. `trace` holds every row recorded before the failure.
    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize, trace: Vec<TraceRow> },

    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Diverged { .. } | Error::Io(_))
    }
}
