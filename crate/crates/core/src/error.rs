//! Error types shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Tensor/vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// A numeric computation produced NaN/Inf or failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Explicit time step violated its stability bound.
    #[error("stability error at step {step}: {detail}")]
    Stability { step: usize, detail: String },

    /// Shallow-water depth became non-positive.
    #[error("drying error at step {step}: h <= 0 at cell ({i}, {j})")]
    Drying { step: usize, i: usize, j: usize },

    /// Requested more modes than the data can support.
    #[error("rank error: {0}")]
    Rank(String),

    /// Training loss became non-finite.
    #[error("divergence at epoch {epoch}, sample {index}: loss = {loss}")]
    Divergence { epoch: usize, index: usize, loss: f64 },

    /// Memory-meter comparison across incompatible runs.
    #[error("comparability error: {0}")]
    Comparability(String),
}
