use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input text. `context` names the file, line or field.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// Input parsed but violates a model or dataset invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("link `{link}` has physically inconsistent inertial parameters: {detail}")]
    InconsistentParams { link: String, detail: String },

    #[error("signal error: {0}")]
    Signal(String),

    #[error("no samples")]
    NoSamples,

    #[error("infeasible contact kinematics: {0}")]
    InfeasibleContact(String),

    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            got,
        }
    }
}
