use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("write failed: {0}")]
    Write(#[from] io::Error),
    #[error("record has no rows")]
    EmptyRecord,
    #[error(transparent)]
    Numerical(#[from] relulab::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for config problems, 3 for I/O, 1 for everything raised while computing.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config { .. } => 2,
            Self::Io { .. } | Self::Write(_) => 3,
            Self::EmptyRecord | Self::Numerical(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
