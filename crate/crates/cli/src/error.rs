use std::fmt;
use std::path::Path;

use svq_core::SvqError;
use thiserror::Error;

/// A spec problem, anchored to the offending line when there is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invalid {
    pub source: String,
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.msg),
            None => write!(f, "{}: {}", self.source, self.msg),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(Invalid),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Diverged(SvqError),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{0}")]
    Model(SvqError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Usage(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Model(_) => 1,
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<Invalid> for CliError {
    fn from(e: Invalid) -> Self {
        CliError::Invalid(e)
    }
}

impl From<SvqError> for CliError {
    fn from(e: SvqError) -> Self {
        match e {
            SvqError::Diverged { .. } => CliError::Diverged(e),
            SvqError::Io(source) => CliError::Io {
                path: "<unknown>".into(),
                source,
            },
            other => CliError::Model(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
