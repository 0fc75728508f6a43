use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading inputs, running scenarios or writing outputs.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Engine(#[from] react_core::Error),
}

impl HarnessError {
    pub fn invalid(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for bad input, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Read { .. } | Self::Parse { .. } | Self::Invalid { .. } | Self::Argument(_) => 2,
            Self::Write { .. } | Self::Engine(_) => 3,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
