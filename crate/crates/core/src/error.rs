use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}: not an FVEC file")]
    NotFvec(PathBuf),

    #[error("corrupt FVEC: {0}")]
    CorruptFvec(String),

    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid model checkpoint: {0}")]
    Checkpoint(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("kappa is undefined when expected accuracy equals 1")]
    UndefinedKappa,

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code for the CLI: 2 config, 3 data/alignment, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
