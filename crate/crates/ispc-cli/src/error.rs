//! CLI error classification mapped onto process exit codes.

use std::fmt;

/// Exit codes: 0 success, 2 usage (owned by clap), 3 format, 4 pipeline.
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed, or inconsistent files.
    Format(String),
    /// The decoding/evaluation pipeline rejected valid-looking input.
    Pipeline(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn format(msg: impl Into<String>) -> Self {
        CliError::Format(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Format(_) => EXIT_FORMAT,
            CliError::Pipeline(_) => EXIT_PIPELINE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Format(msg) => write!(f, "format error: {msg}"),
            CliError::Pipeline(msg) => write!(f, "pipeline error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ispc_core::Error> for CliError {
    fn from(e: ispc_core::Error) -> Self {
        CliError::Pipeline(e.to_string())
    }
}
