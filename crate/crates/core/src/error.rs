use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PolarError> = std::result::Result<T, E>;

/// Coarse error classes. The CLI maps each one to a distinct exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Format,
    Numeric,
    InsufficientData,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Format => 2,
            ErrorCategory::Numeric => 3,
            ErrorCategory::InsufficientData => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum PolarError {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("format error at byte offset {offset}: {message}")]
    FormatAtOffset { offset: u64, message: String },

    #[error("format error at line {line}: {message}")]
    FormatAtLine { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("duplicate token {0:?}")]
    DuplicateToken(String),

    #[error("token {0:?} not found in vocabulary")]
    NotFound(String),

    #[error("token {0:?} has a zero-norm vector")]
    ZeroVector(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} {value} out of bounds (limit {limit})")]
    OutOfBounds {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no usable polar pairs")]
    NoUsablePairs,

    #[error("polar pair ({positive}, {negative}) has identical vectors")]
    DegeneratePair { positive: String, negative: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(
        "direction matrix is ill-conditioned (condition number {condition_number:.3e}, \
         rank {rank} of {n_dims} dimensions); polar coordinates would be unreliable"
    )]
    IllConditioned {
        condition_number: f64,
        rank: usize,
        n_dims: usize,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl PolarError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        PolarError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use PolarError::*;
        match self {
            NotFound(_) | OutOfBounds { .. } | InvalidArgument(_) => ErrorCategory::Usage,
            Io { .. }
            | FormatAtOffset { .. }
            | FormatAtLine { .. }
            | Format(_)
            | DuplicateToken(_)
            | DimensionMismatch { .. }
            | Json(_) => ErrorCategory::Format,
            ZeroVector(_)
            | DegeneratePair { .. }
            | Numeric(_)
            | IllConditioned { .. }
            | UndefinedCorrelation(_) => ErrorCategory::Numeric,
            NoUsablePairs | InsufficientData(_) | DegenerateData(_) => {
                ErrorCategory::InsufficientData
            }
        }
    }
}
