use std::path::PathBuf;

/// Errors produced by the model, statistics, and store layers.
///
/// Variants are grouped so a caller can map them onto coarse exit
/// categories: bad arguments, malformed schema or documents, missing or
/// unreadable data, and numeric failure during optimization.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}, only 1 and 2 are implemented")]
    UnsupportedDimension(usize),

    #[error("{0}")]
    Schema(String),

    #[error("parse error at data row {row}, column {column}: {detail}")]
    Parse {
        row: u64,
        column: String,
        detail: String,
    },

    #[error("{0}")]
    NotFound(String),

    #[error("{0}")]
    MissingData(String),

    #[error("empty bin: {0}")]
    EmptyBin(String),

    #[error("store is locked by another writer: {}", .0.display())]
    Locked(PathBuf),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse failure category, used by callers to pick an exit code
    /// and an error prefix.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedDimension(_) => ErrorCategory::Usage,
            Error::Schema(_) | Error::Json(_) => ErrorCategory::Schema,
            Error::Parse { .. }
            | Error::NotFound(_)
            | Error::MissingData(_)
            | Error::EmptyBin(_)
            | Error::Locked(_)
            | Error::Io(_) => ErrorCategory::Data,
            Error::Numeric(_) => ErrorCategory::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Schema,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Schema => "schema",
            ErrorCategory::Data => "data",
            ErrorCategory::Numeric => "numeric",
        }
    }
}
