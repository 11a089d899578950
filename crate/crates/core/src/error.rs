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

    #[error("{0}: corpus is empty")]
    EmptyCorpus(PathBuf),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("character {ch:?} at offset {offset} is not in the vocabulary")]
    UnknownCharacter { ch: char, offset: usize },

    #[error("index format: {0}")]
    Format(String),

    #[error("model {0} is not loaded")]
    ModelNotLoaded(&'static str),

    #[error("fingerprint mismatch: index was built from {expected}, corpus is {actual}")]
    FingerprintMismatch { expected: String, actual: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
