use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node id {node} out of range for graph with {node_count} nodes")]
    InvalidNode { node: NodeId, node_count: usize },

    #[error("graph has {edges} edges; exact enumeration is limited to {limit}")]
    TooLarge { edges: usize, limit: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("graph fingerprint mismatch: file was built for {expected}, graph is {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("corrupted model: {0}")]
    CorruptModel(String),

    #[error("estimator failed on candidate {candidate}: {source}")]
    Estimator {
        candidate: NodeId,
        #[source]
        source: Box<Error>,
    },

    #[error("missing configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
