use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record could not be parsed. `line` is 1-based.
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    /// Data is well-formed but inconsistent (duplicate ids, coverage gaps, mixed dimensionality).
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Degenerate or mismatched input to a numerical routine.
    #[error("input error: {0}")]
    Input(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// A random baseline fell outside its sanity band.
    #[error("sanity gate failed: {0}")]
    SanityGate(String),

    #[error("while processing sentence {id}: {source}")]
    Sentence {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_sentence(self, id: &str) -> Self {
        Error::Sentence {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    /// Strips any `Sentence` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sentence { source, .. } => source.root(),
            other => other,
        }
    }
}
