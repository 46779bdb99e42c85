//! Crate-wide error type.
//!
//! Shape mismatches on hot paths (forward/backward contracts) panic via
//! `assert!`; everything recoverable (configuration, data, file formats,
//! numerical failures) goes through [`Error`].

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value (bad dimensions, zero step counts, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data cannot be processed (empty mesh, empty point set, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// A text file failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// A binary file has a bad magic, version, or truncated payload.
    #[error("bad file format: {0}")]
    Format(String),

    /// Optimization diverged or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) | Error::Parse { .. } | Error::Format(_) | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}
