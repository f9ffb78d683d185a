use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("invalid example `{id}`: {reason}")]
    InvalidExample { id: String, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The observed label set and cardinality cap have zero probability
    /// under the current prior. Raised by the inference engines without an id.
    #[error("label-set evidence has zero probability")]
    ZeroEvidence,

    #[error("evidence impossible for signal `{id}`")]
    EvidenceImpossible { id: String },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
