//! Library side of the `xnet` command: config parsing and experiment execution.

pub mod config;
pub mod run;

use std::fmt;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input files (exit 2).
    Usage(String),
    /// The computation itself failed, e.g. diverged (exit 1).
    Run(xnet_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<xnet_core::Error> for CliError {
    fn from(e: xnet_core::Error) -> Self {
        use xnet_core::Error as E;
        match e {
            E::Diverged { .. } | E::NonFiniteGradient { .. } | E::NonFinite { .. } => {
                CliError::Run(e)
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
