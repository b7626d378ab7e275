//! Error types shared across the crate.

use thiserror::Error;

/// Errors emitted by tensors, layers, networks, training, and file formats.
#[derive(Debug, Error)]
pub enum VnnError {
    /// Mismatched or invalid tensor shapes.
    #[error("shape error: {0}")]
    Shape(String),

    /// Window or index beyond tensor extents.
    #[error("bounds error: {0}")]
    Bounds(String),

    /// Layer window does not fit the incoming feature shape.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Invalid network, training, or dataset configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed binary file; `offset` is the byte position of the problem.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Dataset clip failed to load or validate; names the offending clip.
    #[error("data error for clip '{id}': {message}")]
    Data { id: String, message: String },

    /// Training loss became non-finite or exceeded the divergence guard.
    #[error("training diverged at epoch {epoch}, step {step}: {message}")]
    Divergence {
        epoch: usize,
        step: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VnnError>;
