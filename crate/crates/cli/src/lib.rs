//! Batch driver: reads a run configuration, runs the solvers and writes CSV.

pub mod commands;
pub mod config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] illiquid::Error),
}

impl CliError {
    /// 1 for usage, configuration and I/O problems, 4 when a solver fails.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Solver(e) => match e {
                illiquid::Error::Domain(_) | illiquid::Error::Config(_) | illiquid::Error::Mismatch(_) => 1,
                _ => 4,
            },
        }
    }
}

/// Exit status of a successful command.
pub const EXIT_OK: u8 = 0;
/// `validate` found the growth condition to hold only with equality.
pub const EXIT_BORDERLINE: u8 = 2;
/// `validate` found the growth condition violated.
pub const EXIT_FAIL: u8 = 3;
