use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes, one per error category. Argument errors exit with 2
/// through clap.
pub mod exit {
    pub const NOT_FOUND: i32 = 3;
    pub const INVALID: i32 = 4;
    pub const INFEASIBLE: i32 = 5;
    pub const IO: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{what} not found: {}", path.display())]
    NotFound { what: &'static str, path: PathBuf },
    #[error("invalid {what} {}: {msg}", path.display())]
    BadFile {
        what: &'static str,
        path: PathBuf,
        msg: String,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("infeasible enumeration: {0}")]
    Infeasible(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotFound { .. } => exit::NOT_FOUND,
            CliError::BadFile { .. } | CliError::Invalid(_) => exit::INVALID,
            CliError::Infeasible(_) => exit::INFEASIBLE,
            CliError::Io { .. } => exit::IO,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<wcd_core::Error> for CliError {
    fn from(e: wcd_core::Error) -> Self {
        match e {
            wcd_core::Error::EnumerationLimit { .. } => CliError::Infeasible(e.to_string()),
            wcd_core::Error::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Invalid(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
