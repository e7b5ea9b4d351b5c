//! Error type shared by all commands, with exit-code mapping.

use std::path::PathBuf;

/// Process exit codes: 0 success, 2 validation error, 3 gate halt
/// (non-identifiable), 1 runtime failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Runtime = 1,
    Validation = 2,
    GateHalt = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),

    /// The workflow stopped at an identifiability gate; downstream stages
    /// were skipped on purpose.
    #[error("workflow halted: {0}")]
    GateHalt(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::Validation,
            CliError::Io { .. } | CliError::Runtime(_) => ExitCode::Runtime,
            CliError::GateHalt(_) => ExitCode::GateHalt,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl From<identikit_core::Error> for CliError {
    fn from(e: identikit_core::Error) -> Self {
        match &e {
            identikit_core::Error::Validation(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
