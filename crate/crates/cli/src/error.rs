use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] mindex::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for bad input or configuration, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Degenerate(_) => 3,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let kind = match self {
            CliError::Usage(_) | CliError::Core(mindex::Error::Usage(_)) => "usage",
            CliError::Schema(_) => "schema",
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Degenerate(_) | CliError::Core(mindex::Error::DegenerateData(_)) => "degenerate_data",
            CliError::Core(mindex::Error::Divergence { .. }) => "divergence",
            CliError::Core(mindex::Error::Singular(_)) => "singular",
            CliError::Core(mindex::Error::Normalization(_)) => "normalization",
            CliError::Core(mindex::Error::Initialization(_)) => "initialization",
        };
        ErrorReport { status: "error", kind, exit_code: self.exit_code(), message: self.to_string() }
    }
}

/// Machine-readable failure record.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub kind: &'static str,
    pub exit_code: u8,
    pub message: String,
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
