use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("srcML conversion failed: {0}")]
    Xml(String),

    #[error("language mismatch: expected `{expected}`, got `{got}`")]
    LanguageMismatch { expected: String, got: String },

    #[error("missing algorithm label `{0}`")]
    MissingLabel(String),

    #[error("insufficient pairs: {0}")]
    InsufficientPairs(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Grammar(String),

    #[error("{failed} input(s) failed:\n{details}")]
    Batch { failed: usize, details: String },
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for violations of the user-input contract,
    /// 1 for validation and internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Xml(_)
            | Error::LanguageMismatch { .. }
            | Error::MissingLabel(_)
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Batch { .. } => 2,
            _ => 1,
        }
    }
}
