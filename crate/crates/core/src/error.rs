use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("phase finder did not converge (best residual {residual:.3e})")]
    NoSolution { residual: f64 },

    #[error("index {index} out of range ({len} candidates)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("parse error at line {line}, column {column}: {message}\n  | {context}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
        context: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
