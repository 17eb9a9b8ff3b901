use std::path::PathBuf;

use crate::dataset::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("{0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dataset: {}", format_violations(.0))]
    InvalidDataset(Vec<Violation>),

    /// Optimization or decomposition produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        found: [u8; 4],
        expected: [u8; 4],
    },

    #[error("{path}: unsupported format version {found}")]
    UnsupportedVersion { path: PathBuf, found: u32 },

    #[error("{path}: truncated payload, expected {expected} bytes but file has {actual}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: {trailing} unexpected trailing bytes after payload")]
    TrailingBytes { path: PathBuf, trailing: u64 },

    #[error("{path}: label {label} at row {row} is not below class count {class_count}")]
    LabelOutOfRange {
        path: PathBuf,
        row: usize,
        label: u32,
        class_count: u32,
    },

    #[error("{path}: non-finite value at row {row}, column {col}")]
    NonFinite {
        path: PathBuf,
        row: usize,
        col: usize,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("malformed report: {0}")]
    Report(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
