//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Cholesky factorization hit a non-positive pivot. The matrix is not
    /// positive definite (or numerically rank deficient).
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },

    /// A channel vector with vanishing norm reached a beam-direction solve.
    #[error("degenerate channel: direction norm {norm:.3e} below threshold")]
    DegenerateChannel { norm: f64 },

    /// Bisection could not bracket the power constraint.
    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Mini-batch loss became non-finite during training.
    #[error("non-finite loss ({value}) at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, value: f64 },

    /// A gradient contained NaN; the optimizer refuses to apply it.
    #[error("NaN gradient in parameter block {block}")]
    NanGradient { block: usize },

    /// Checkpoint file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A DL method was requested but no checkpoint was supplied.
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
