use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] condmean::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot write {}: {}", .0.display(), .1)]
    Io(PathBuf, io::Error),

    #[error("cannot write output: {0}")]
    Output(String),

    #[error("strict mode: {} invariant violation(s): {}", .0.len(), .0.join("; "))]
    Strict(Vec<String>),
}

impl CliError {
    /// 1 parse/configuration, 2 domain, 3 convergence, 4 strict-mode invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Config(_) => 1,
            CliError::Io(..) | CliError::Output(_) => 2,
            CliError::Strict(_) => 4,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
