use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MistError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MistError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Every pixel failed the rank test; nothing can be recovered.
    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    #[error("degenerate region of interest: {0}")]
    DegenerateRoi(String),

    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}:{line}: config error: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MistError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MistError::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MistError::Io {
            path: path.into(),
            source,
        }
    }
}
