use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{key}: {message}")]
    Config { key: String, message: String },
    #[error("{path}:{line}: {message}")]
    ConfigFile { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] cwsoc::Error),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Exit status for success, failed checks or runs, and bad invocations.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config { key: key.to_string(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use cwsoc::Error as E;
        match self {
            CliError::Config { .. } | CliError::ConfigFile { .. } => EXIT_USAGE,
            CliError::Core(
                E::InvalidConfig(_)
                | E::InvalidMeasure(_)
                | E::NotFiniteSupport(_)
                | E::StateSpaceTooLarge { .. }
                | E::TooFewSamples { .. },
            ) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}
