use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("duplicate user id `{0}`")]
    DuplicateUser(String),

    #[error("dimension mismatch: expected {expected}, got {actual} (user `{user}`)")]
    Dimension {
        user: String,
        expected: usize,
        actual: usize,
    },

    #[error("missing label for user `{0}`")]
    MissingLabel(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("gradient check failed: max relative error {max_rel_error:.3e} exceeds {tolerance:.1e} ({worst})")]
    GradCheck {
        max_rel_error: f64,
        tolerance: f64,
        worst: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes; the CLI maps them onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Usage,
            Error::NonFinite(_) | Error::GradCheck { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
