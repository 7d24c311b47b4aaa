use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid event set: {0}")]
    InvalidEvents(String),

    #[error("invalid backend: {0}")]
    InvalidBackend(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("chain file {path}: {message}")]
    ChainFormat { path: PathBuf, message: String },

    #[error("data mismatch: {0}")]
    Mismatch(String),

    #[error("{what} {index}: {source}")]
    Indexed {
        what: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("benchmark results drifted across repeats ({first} vs {other})")]
    ResultDrift { first: f64, other: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
