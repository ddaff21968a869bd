//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or argument.
    #[error("configuration error: {0}")]
    Config(String),

    /// Matrix or vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A numeric evaluation produced NaN or infinity.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Label generation failed for too many samples.
    #[error("label generation failed: {0}")]
    Generation(String),

    /// A simulation step could not be completed.
    #[error("simulation failed at step {step}: {reason}")]
    Simulation { step: usize, reason: String },

    /// Model selection had no network for the requested branch or cluster.
    #[error("selection error: {0}")]
    Selection(String),

    /// Artifacts from different runs or problems were mixed.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Malformed file contents.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
