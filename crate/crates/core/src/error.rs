use thiserror::Error;

/// Errors produced by clustering, summarization, embedding, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("vector entries must be finite, got {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("zero-norm vector: cosine similarity is undefined")]
    ZeroNorm,

    #[error("k = {k} exceeds the number of distinct points ({distinct})")]
    KExceedsDistinct { k: usize, distinct: usize },

    #[error("summary period {period} must lie in 1..={total}")]
    InvalidSchedule { period: usize, total: usize },

    #[error("assignment {cluster} out of range for k = {k}")]
    AssignmentOutOfRange { cluster: usize, k: usize },

    #[error("embedding text must be non-empty")]
    EmptyText,

    #[error("embedding store has no vector for {key}")]
    StoreMiss { key: String },

    #[error("remote request failed after {attempts} attempts: {reason}")]
    Transport { attempts: u32, reason: String },

    #[error("remote embedding has dim {got}, provider expects {expected}")]
    RemoteDim { expected: usize, got: usize },

    #[error("remote response malformed: {0}")]
    RemoteFormat(String),

    #[error("llm client failed after {attempts} attempts: {reason}")]
    LlmTransport { attempts: u32, reason: String },

    #[error("label slices differ in length: {left} vs {right}")]
    LabelLength { left: usize, right: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("centroid sets differ in size: {left} vs {right}; metric undefined")]
    CentroidCount { left: usize, right: usize },

    #[error("document {id} has no timestamp; stream mode needs timestamps — use static clustering instead")]
    MissingTimestamp { id: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
