use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

/// Process exit codes; stable across releases.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const RUNTIME: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// Chain files whose headers do not follow the schema or disagree.
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] bayescal_core::Error),
    #[error("{0}")]
    Runtime(String),
    #[error("chains did not converge: {}", .0.join(", "))]
    NotConverged(Vec<String>),
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Self::Parse {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    pub fn schema(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        use bayescal_core::Error as E;
        match self {
            Self::Config(_) | Self::Schema { .. } => exit::CONFIG,
            Self::Core(E::Config(_) | E::InvalidPrior(_)) => exit::CONFIG,
            Self::NotConverged(_) => exit::NOT_CONVERGED,
            Self::Io { .. } | Self::Parse { .. } | Self::Core(_) | Self::Runtime(_) => {
                exit::RUNTIME
            }
        }
    }
}
