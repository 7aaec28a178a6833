use crate::checkpoint::CheckpointError;
use crate::config::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Core(#[from] wcgl_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("{0}")]
    Serialize(String),
}

impl HarnessError {
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, HarnessError::Core(wcgl_core::Error::BlowUp { .. }))
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
