//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ensemble has no particles")]
    EmptyEnsemble,

    #[error("dataset has no samples")]
    EmptyDataset,

    #[error("zero particle: polar direction undefined")]
    ZeroParticle,

    #[error("zero vector where a direction is required")]
    ZeroVector,

    #[error("weight scale is zero; normalized margin undefined")]
    ZeroScale,

    #[error("non-finite gradient at particle {particle} (step {step})")]
    NonFiniteGradient { particle: usize, step: usize },

    #[error("flow diverged at step {step}: risk {risk:e}")]
    Diverged { step: usize, risk: f64 },

    #[error("data is not separable ({0})")]
    NotSeparable(String),

    #[error("kernel matrix is not symmetric positive semidefinite")]
    NotPsd,

    #[error("boundary extraction requires d = 2, got d = {0}")]
    NotPlanar(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
