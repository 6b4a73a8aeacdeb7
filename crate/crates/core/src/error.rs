use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty after pruning")]
    EmptyCorpus,
    #[error("malformed event at line {line}: {reason}")]
    MalformedEvent { line: usize, reason: String },
    #[error("malformed interaction at line {line}: {reason}")]
    MalformedInteraction { line: usize, reason: String },
    #[error("invalid holdout split: {0}")]
    InvalidSplit(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("insufficient history: window needs {needed} time steps, {available} available")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("pair set is empty")]
    EmptyPairSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("held-out token does not fit the model: {0}")]
    HoldoutMismatch(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for CLI exit codes and machine-readable
/// error lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Data => "data",
            ErrorCategory::Numeric => "numeric",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Numeric => 4,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) | Error::InvalidSplit(_) => ErrorCategory::Usage,
            Error::Numeric(_) | Error::Dimension { .. } => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }
}
