use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration, missing files or unusable input data.
    #[error("{0}")]
    Config(String),

    /// A fit, sampler or search failed on valid input.
    #[error("{context}: {source}")]
    Numerical { context: String, source: piic::Error },

    /// Outputs were produced but the run did not succeed numerically.
    #[error("{0}")]
    Failure(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical { .. } | CliError::Failure(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

pub fn config<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

/// Tags a library error with the module that raised it and sorts it into
/// the input or numerical bucket.
pub fn tagged(context: &str) -> impl FnOnce(piic::Error) -> CliError + '_ {
    move |e| {
        if e.is_input_error() {
            CliError::Config(format!("{context}: {e}"))
        } else {
            CliError::Numerical { context: context.to_string(), source: e }
        }
    }
}
