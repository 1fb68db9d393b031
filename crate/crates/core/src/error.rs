use thiserror::Error;

pub type Result<T> = std::result::Result<T, SvqError>;

#[derive(Debug, Error)]
pub enum SvqError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Every response in a normalisation context underflowed to zero.
    /// `context` is the 0-based centre of the offending neighbourhood, or
    /// `None` for the unrestricted posterior.
    #[error("degenerate responses: {}", describe_context(.context))]
    DegenerateResponse { context: Option<usize> },

    #[error("covariance is rank deficient: {null_dims} null direction(s)")]
    RankDeficient { null_dims: usize },

    #[error("training diverged at step {step}: objective {total} exceeds 10x initial {initial}")]
    Diverged { step: usize, total: f64, initial: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn describe_context(context: &Option<usize>) -> String {
    match context {
        Some(c) => format!("all Q(x|y) underflow in the neighbourhood of code {}", c + 1),
        None => "all Q(x|y) underflow".to_string(),
    }
}

impl SvqError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SvqError::Config(msg.into())
    }
}
