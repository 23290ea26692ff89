//! Training frameworks for long-horizon autoregressive prediction of latent
//! PDE dynamics: a one-step baseline, the autoregressive training framework
//! (ATF), pushforward (PF) and stochastic pushforward (SPF), together with
//! the finite-difference solvers, reduced-order compression and evaluation
//! metrics needed to compare them end to end.

pub mod error;
pub mod metrics;
pub mod nn;
pub mod physics;
pub mod reduction;
pub mod seed;
pub mod surrogate;
pub mod tensor;
pub mod trainers;

pub use error::CoreError;
pub use tensor::Tensor;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
