//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must agree on a dimension do not.
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    /// The underlying graph violates a structural requirement.
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    /// A configuration or operation parameter is out of range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// A client did not receive the projection it needs from a neighbor.
    #[error("client {client} is missing the message from neighbor {neighbor} (round {round})")]
    MissingMessage {
        client: usize,
        neighbor: usize,
        round: usize,
    },

    /// Training state became non-finite; the run was aborted.
    #[error("non-finite value in training state at round {round}")]
    NonFinite { round: usize },

    #[error("{path}: row {row}, column `{column}`: {reason}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("dense assembly refused: total dimension {dim} exceeds limit {limit}")]
    TooLargeForDense { dim: usize, limit: usize },

    /// Error raised while evaluating one section of an experiment config.
    #[error("config `{path}`: {source}")]
    Config {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    /// Wraps the error with the config path that produced it.
    pub fn at(self, path: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
