use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}", path.display())]
    File { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("corpus contains no tokens")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed embedding file: {0}")]
    Format(String),

    #[error("cannot normalize zero vector of word {0:?}")]
    ZeroVector(String),

    #[error("invalid dictionary: {0}")]
    Dictionary(String),

    #[error("seed dictionary is empty: {0}")]
    EmptySeed(String),

    #[error("retrieval: {0}")]
    Retrieval(String),

    #[error("evaluation: {0}")]
    Eval(String),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
