use thiserror::Error;

use crate::solver::NonConvergence;

/// Errors produced by grid construction, field handling and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("singular matrix: zero pivot in column {0}")]
    Singular(usize),

    #[error("{0}")]
    NonConvergence(Box<NonConvergence>),

    #[error("truncation still active after {rounds} shrink rounds (delta = {delta:e})")]
    DeltaSelection { rounds: usize, delta: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
