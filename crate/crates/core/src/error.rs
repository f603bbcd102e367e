use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel parameter `{field}`: {reason}")]
    InvalidKernel { field: &'static str, reason: String },

    #[error("point ({x}, {y}) lies outside the domain [0, 1]^2")]
    OutOfDomain { x: f64, y: f64 },

    #[error("quadrature grid needs between 2 and {max} nodes, got {got}")]
    InvalidGrid { got: usize, max: usize },

    #[error("eigensolver did not converge on a {0}x{0} matrix")]
    Eigensolve(usize),

    #[error("covariance spectrum is identically zero")]
    ZeroSpectrum,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("rejection budget exhausted: {accepted} of {target} accepted after {attempts} attempts")]
    BudgetExhausted {
        attempts: u64,
        accepted: usize,
        target: usize,
    },

    #[error("no spectral gap: second eigenvalue group {kappa2} >= top group {kappa1}")]
    NoSpectralGap { kappa1: f64, kappa2: f64 },

    #[error("truncation point {0} (in units of the scale) is past the underflow limit")]
    Underflow(f64),

    #[error("effective sample size {ess:.2} is below the floor {floor}")]
    InsufficientEss { ess: f64, floor: f64 },

    #[error("grid of {got} nodes is too coarse for fourth-order differences (need {need})")]
    GridTooCoarse { got: usize, need: usize },

    #[error("need at least {need} retained modes, have {got}")]
    TooFewModes { got: usize, need: usize },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
