use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate 6D rotation: {0}")]
    DegenerateRotation(String),

    #[error("operation requires a non-empty part list")]
    EmptyParts,

    #[error("surface sampling acceptance rate fell below {rate:.2e} ({accepted}/{attempted} accepted); parts may be mutually contained")]
    LowAcceptance {
        rate: f64,
        accepted: usize,
        attempted: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported format version {found} (expected {expected}) in {path}")]
    VersionMismatch {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("checkpoint was trained against a different manifest (hash {expected} vs {found}); refusing to continue")]
    ManifestMismatch { expected: String, found: String },

    #[error("non-finite loss at step {step} (records {records:?})")]
    NonFiniteLoss { step: u64, records: Vec<String> },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
