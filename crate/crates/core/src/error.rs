use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the toolkit.
///
/// Variants fall into two families that the command line maps onto distinct
/// exit codes: data errors (malformed or inconsistent inputs) and contract
/// errors (invalid configuration or mismatched artifacts).
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("negative value {value} at row {row} (node {node}), column `{column}`")]
    NegativeValue {
        row: usize,
        node: NodeId,
        column: String,
        value: f64,
    },

    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },

    #[error("empty {split} split (timesteps {range})")]
    EmptySplit { split: &'static str, range: String },

    #[error("degenerate labels: {0}")]
    SingleClass(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible objective {objective}: best achievable value is {best}")]
    Infeasible { objective: String, best: f64 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code: 1 for data errors, 2 for contract/config errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DuplicateNode(_)
            | Error::UnknownNode(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::NegativeValue { .. }
            | Error::NonFinite { .. }
            | Error::EmptySplit { .. }
            | Error::SingleClass(_) => 1,
            Error::SchemaMismatch(_) | Error::InvalidArgument(_) | Error::Infeasible { .. } | Error::Json(_) => 2,
        }
    }
}
