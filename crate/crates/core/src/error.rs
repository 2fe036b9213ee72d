//! Error type shared by all toolkit modules.

use thiserror::Error;

/// Errors produced by configuration parsing, signal synthesis, estimation,
/// and the beamforming solver.
#[derive(Debug, Error)]
pub enum Error {
    /// A size or index argument is invalid on its own (e.g. zero-length array).
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// Two arguments have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A configuration value violates an invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input lies outside the validity region of a physical model.
    #[error("domain error: {0}")]
    Domain(String),

    /// Random generation could not satisfy a structural requirement.
    #[error("generation failed: {0}")]
    Generation(String),

    /// An internal solver identity failed to hold numerically.
    #[error("solver consistency violation: {0}")]
    SolverConsistency(String),

    /// Structured-text (config/mask/manifest) parsing failed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Tensor container or CSV file handling failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
