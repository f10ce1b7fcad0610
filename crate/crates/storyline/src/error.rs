//! Crate-wide error type.

use thiserror::Error;

/// Failures across loading, modeling, decoding, and pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {path}:{line}: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid document {doc_id}: {message}")]
    InvalidDocument { doc_id: String, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("cycle detected in temporal graph")]
    CycleDetected,

    #[error("self-loop candidate edge at node {0}")]
    SelfLoop(usize),

    #[error("invalid temporal graph: {0}")]
    Graph(String),

    #[error("unknown discourse label {0:?}")]
    UnknownLabel(String),

    #[error("position {position} out of range for sentence of length {len}")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("non-finite gradient in parameter {param} at element {index}")]
    NonFiniteGradient { param: String, index: usize },

    #[error("non-finite loss during {0}")]
    NonFiniteLoss(String),

    #[error("filter mode {mode} requires {artifact}, which was not provided")]
    MissingArtifact { mode: String, artifact: String },

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("pipeline stage {stage} failed on document {doc_id}: {source}")]
    Stage {
        stage: String,
        doc_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage and document where it occurred.
    pub fn in_stage(self, stage: &str, doc_id: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            doc_id: doc_id.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
