use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("unreadable source: {0}")]
    Source(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate key {key:?} in {store} store")]
    DuplicateKey { store: &'static str, key: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("undefined factor: journal {journal:?} has no stored articles{}", year.map(|y| format!(" for publication year {y}")).unwrap_or_default())]
    UndefinedFactor { journal: String, year: Option<i32> },

    #[error("store corrupted: {0}")]
    Corrupted(String),

    #[error("store is locked by another writer: {0}")]
    Locked(PathBuf),

    #[error("item {0:?} does not take part in any association of the cluster")]
    NotInCluster(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
