use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: line {line}: {message}")]
    Validation {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("series has gaps larger than one cadence step: {}", .spans.join(", "))]
    Gap { spans: Vec<String> },

    #[error("insufficient data: need {required} steps, have {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("episode finished at step {0}")]
    EpisodeFinished(usize),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    /// A policy or forecaster implemented outside this crate failed.
    #[error("{0}")]
    External(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
