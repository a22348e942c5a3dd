use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown provenance source `{0}`")]
    UnknownSource(String),

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("no edge {start} -[{relation}]- {end} in graph")]
    UnknownEdge {
        start: String,
        end: String,
        relation: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient {what}: requested {requested}, found {found}")]
    Insufficient {
        what: &'static str,
        requested: usize,
        found: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unknown pair id `{0}`")]
    UnknownPair(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Stable snake_case tag for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::UnknownRelation(_) => "unknown_relation",
            Error::UnknownSource(_) => "unknown_source",
            Error::UnknownConcept(_) => "unknown_concept",
            Error::UnknownEdge { .. } => "unknown_edge",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Insufficient { .. } => "insufficient",
            Error::Shape(_) => "shape",
            Error::Diverged { .. } => "diverged",
            Error::Checkpoint(_) => "checkpoint",
            Error::UnknownPair(_) => "unknown_pair",
        }
    }
}
