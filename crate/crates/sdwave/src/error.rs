use std::path::{Path, PathBuf};

use sdwave_core::HypothesisViolation;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: key `{key}`: {message}", path.display())]
    Config { path: PathBuf, key: String, message: String },
    #[error("{}: key `{key}`: {violation}", path.display())]
    Hypothesis { path: PathBuf, key: String, violation: HypothesisViolation },
    #[error("{}: blow-up: {message}", path.display())]
    BlowUp { path: PathBuf, message: String },
    #[error("{}: {context}: {source}", path.display())]
    Io { path: PathBuf, context: String, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Numerics { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn config(path: &Path, key: &str, message: String) -> CliError {
        CliError::Config { path: path.to_path_buf(), key: key.to_string(), message }
    }

    pub fn hypothesis(path: &Path, key: &str, violation: HypothesisViolation) -> CliError {
        CliError::Hypothesis { path: path.to_path_buf(), key: key.to_string(), violation }
    }

    /// Maps a core error raised while running a configuration.
    pub fn from_core(path: &Path, e: sdwave_core::Error) -> CliError {
        match e {
            sdwave_core::Error::BlowUp { time } => {
                CliError::BlowUp { path: path.to_path_buf(), message: format!("non-finite state after t = {time}") }
            }
            sdwave_core::Error::Hypothesis(v) => CliError::hypothesis(path, "nonlinearity", v),
            other => CliError::Numerics { path: path.to_path_buf(), message: other.to_string() },
        }
    }

    /// 0 ok, 1 configuration or other error, 2 hypothesis violation,
    /// 3 blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Hypothesis { .. } => 2,
            CliError::BlowUp { .. } => 3,
            _ => 1,
        }
    }
}
