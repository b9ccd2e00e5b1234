use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An index, length or horizon exceeds what the inputs support.
    #[error("range error: {0}")]
    Range(String),

    /// The offspring mass is too large for the requested object to exist,
    /// or a simulated intensity blew up.
    #[error("stability error: {0}")]
    Stability(String),

    /// A function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A run would exceed the configured resource limits.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Configuration validation failed; every violation is listed.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    /// Malformed text input (tables, triples).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
