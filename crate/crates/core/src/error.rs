use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
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

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("cold user `{0}` has no training ratings")]
    ColdUser(String),

    #[error("item `{0}` is not owned by any provider in the catalog")]
    UnownedItem(String),

    #[error("cannot re-rank an empty list")]
    EmptyList,

    #[error("factorization diverged at sweep {sweep}: objective is {objective}")]
    Diverged { sweep: usize, objective: f64 },

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable code used by the CLI on failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::Parse { .. } => "E_PARSE",
            Error::InvalidArgument(_) => "E_ARGUMENT",
            Error::UnknownUser(_) => "E_UNKNOWN_USER",
            Error::ColdUser(_) => "E_COLD_USER",
            Error::UnownedItem(_) => "E_UNOWNED_ITEM",
            Error::EmptyList => "E_EMPTY_LIST",
            Error::Diverged { .. } => "E_DIVERGED",
            Error::Config(_) => "E_CONFIG",
        }
    }
}
