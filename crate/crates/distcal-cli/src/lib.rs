//! Library half of the `distcal` binary: feature-file IO, layered run
//! configuration, report writing, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod features_io;
pub mod report_io;

use std::fmt;

/// CLI failures, split by exit code: usage errors exit 1, data errors 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) => write!(f, "usage error: {msg}"),
            Self::Data(msg) => write!(f, "data error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<distcal::Error> for CliError {
    fn from(err: distcal::Error) -> Self {
        Self::Data(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::Data(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
