//! Error type shared across the toolkit.
//!
//! Every fallible operation returns [`Error`]. The variants map onto the
//! process exit codes used by the CLI: configuration problems exit with 2,
//! data and parse problems with 3, numeric failures with 4.

use std::path::Path;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: out-of-range hyperparameters, impossible
    /// split fractions, malformed pipeline options.
    #[error("config error: {0}")]
    Config(String),

    /// A file exists but its contents cannot be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    /// Structurally valid input that violates a data contract (missing
    /// signal files, duplicate ids, label mismatches, empty partitions).
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure: non-finite values where finite ones are required,
    /// degenerate denominators that cannot be recovered from.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Underlying I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    /// Exit code the CLI should terminate with for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::Data(_) | Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_cli_contract() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Data("x".into()).exit_code(), 3);
        assert_eq!(
            Error::parse(Path::new("m.json"), "bad json").exit_code(),
            3
        );
        assert_eq!(Error::Numeric("x".into()).exit_code(), 4);
    }
}
