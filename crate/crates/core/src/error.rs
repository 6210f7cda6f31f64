//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A graph value violates one of its structural invariants.
    #[error("graph invariant violated: {0}")]
    GraphInvariant(String),

    /// More real nodes than the padded space can hold.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Tensor shapes incompatible for a primitive.
    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },

    /// NaN or infinity crossed a node boundary in checked mode.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A call violated an operation contract (non-scalar root, non-unit input, ...).
    #[error("contract violated: {0}")]
    Contract(String),

    /// Invalid configuration value.
    #[error("invalid config: {0}")]
    Config(String),

    /// Pre-normalization vector too close to zero to define a direction.
    #[error("degenerate embedding: pre-normalization norm {0:e}")]
    DegenerateEmbedding(f64),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: {what}")]
    Diverged { step: usize, what: String },

    /// Decoding failed mid-iteration.
    #[error("decode failed at iteration {iter}: {what}")]
    Decode { iter: usize, what: String },

    /// Malformed user input (unknown character, overlength string, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Malformed dataset or checkpoint content.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}
