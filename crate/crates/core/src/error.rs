use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("identity chain not evaluable: {0}")]
    ChainNotEvaluable(String),

    #[error("malformed tree at node {node}: {reason}")]
    Tree { node: String, reason: String },

    #[error("fitting failed: {0}")]
    Fitting(String),

    #[error("filter removed every hypothesis; post-filter set is empty")]
    EmptyPostFilter,

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by malformed or out-of-contract input, as
    /// opposed to failures encountered while computing.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidInput(_)
            | Error::Tree { .. }
            | Error::Parse { .. }
            | Error::Csv(_)
            | Error::Json(_) => true,
            Error::Replicate { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
