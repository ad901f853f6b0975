use std::path::PathBuf;

use thiserror::Error;

/// A malformed input file, located by byte offset.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("at byte {offset}: {message}")]
pub struct FormatError {
    pub offset: u64,
    pub message: String,
}

impl FormatError {
    pub fn new(offset: impl TryInto<u64>, message: impl Into<String>) -> Self {
        Self {
            offset: offset.try_into().unwrap_or(u64::MAX),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("bad input: {0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] maskcon_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        CliError::Format {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for an invalid config, 1 when writing failed.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Write { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
