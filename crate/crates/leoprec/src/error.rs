//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numeric kernels, the solvers and the experiment
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible.
    #[error("shape mismatch in {op}: left is {left}, right is {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    /// A Cholesky pivot was non-positive; the matrix is not HPD.
    #[error("matrix is not positive definite: pivot {index} is non-positive ({value})")]
    NotPositiveDefinite { index: usize, value: f64 },

    /// A diagonal entry is too small for element-wise inversion.
    #[error("diagonal entry {index} has magnitude {magnitude} and cannot be inverted")]
    TinyDiagonal { index: usize, magnitude: f64 },

    /// A layer produced NaN or infinity.
    #[error("non-finite value in {context} at layer {layer}")]
    NonFinite { context: &'static str, layer: usize },

    /// The power-multiplier bisection could not satisfy its tolerance.
    #[error("power multiplier bisection failed after {iterations} iterations")]
    BisectionFailure { iterations: usize },

    /// A backward pass was given a tape recorded by a different forward pass.
    #[error("tape mismatch: {0}")]
    TapeMismatch(String),

    /// A learned method was requested without its checkpoint.
    #[error("missing checkpoint for method `{method}`")]
    MissingCheckpoint { method: String },

    /// Invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The training loss became non-finite.
    #[error("non-finite loss at step {step} (instance seed {seed})")]
    NonFiniteLoss { step: usize, seed: u64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
