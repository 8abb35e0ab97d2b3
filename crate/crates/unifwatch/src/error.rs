use std::io;

use thiserror::Error;

/// Harness and CLI failures, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] unifwatch_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed input at line {line}: {reason}")]
    Input { line: usize, reason: String },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    /// 2 for bad parameters or configuration, 3 for unreadable or malformed
    /// input and failed writes.
    pub fn exit_code(&self) -> i32 {
        use unifwatch_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Json(_) => EXIT_CONFIG,
            HarnessError::Core(e) => match e {
                E::StreamExhausted { .. } | E::SymbolOutOfRange { .. } => EXIT_IO,
                _ => EXIT_CONFIG,
            },
            HarnessError::Io(_) | HarnessError::Input { .. } | HarnessError::Csv(_) => EXIT_IO,
        }
    }
}
