use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("at sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_sample(self, index: usize) -> Self {
        Error::AtSample {
            index,
            source: Box::new(self),
        }
    }

    /// Strips any sample-index wrapping and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtSample { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the error originates from a numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::Degenerate(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
