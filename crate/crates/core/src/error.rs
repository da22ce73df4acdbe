use thiserror::Error;

use crate::feasibility::ViolationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("no path between node {src} and node {dst}")]
    NoPath { src: usize, dst: usize },

    /// Schema violation while decoding a document; `pointer` is a JSON pointer.
    #[error("parse error at {pointer}: {message}")]
    Parse { pointer: String, message: String },

    #[error("referential integrity error at {pointer}: {message}")]
    Reference { pointer: String, message: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("infeasible: {message}")]
    Infeasible {
        message: String,
        report: Option<ViolationReport>,
    },

    #[error("model build error: {0}")]
    Build(String),

    #[error("LP export error: {0}")]
    Export(String),

    #[error("LP parse error on line {line}: {message}")]
    LpParse { line: usize, message: String },

    #[error("search space holds {cardinality} assignments, above the enumeration cap of {cap}")]
    SpaceTooLarge { cardinality: u128, cap: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible {
            message: msg.into(),
            report: None,
        }
    }
}
