//! CLI failures and their exit codes.

use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Verification(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] linssl::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use linssl::Error as E;
        match self {
            Self::Usage(_) | Self::Io { .. } | Self::Config { .. } => EXIT_USAGE,
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Verification(_) => EXIT_VERIFY,
            Self::Core(e) => match e {
                E::Diverged(_) | E::InconsistentMoments(_) | E::NotAnEquilibrium(_) => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
