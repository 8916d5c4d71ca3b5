//! Command-line runner and acceptance battery for `tmedia-core`.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Core(#[from] tmedia_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Json(_) => 2,
            CliError::Core(tmedia_core::Error::Config(_) | tmedia_core::Error::Parse(_)) => 2,
            CliError::Solver(_)
            | CliError::Core(
                tmedia_core::Error::NonConvergence(_)
                | tmedia_core::Error::DeltaSelection { .. }
                | tmedia_core::Error::Singular(_),
            ) => 3,
            CliError::Core(_) | CliError::Io(_) => 2,
        }
    }
}
