use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("fields live on different bases")]
    BasisMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// The quasilinear coefficient lost positivity (min N'(z) over the grid).
    #[error("ellipticity lost: min N'(z) = {min:e}")]
    Degenerate { min: f64 },

    #[error("fixed-point iteration stalled after {iterations} iterations (increment {increment:e})")]
    PicardDivergence { iterations: usize, increment: f64 },

    #[error("singular linear solve in {0}")]
    SingularSolve(&'static str),

    #[error("eigensolver failed: {0}")]
    Eigensolve(String),

    #[error("matrix exponential overflow guard tripped (t*|M| = {0:e})")]
    ExponentialOverflow(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
