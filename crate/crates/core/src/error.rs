use thiserror::Error;

/// Errors raised by the phase-space engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite sample at (x = {x}, p = {p})")]
    NonFiniteSample { x: f64, p: f64 },

    #[error("grid mismatch: operands live on different grids or use different hbar")]
    GridMismatch,

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("derivative stencil needs {needed} points but the axis has only {available}")]
    StencilTooWide { needed: usize, available: usize },

    #[error(
        "kernel is not Hermitian (relative anti-Hermitian norm {relative_norm:.3e}); \
         use a series route instead"
    )]
    NonHermitian { relative_norm: f64 },

    #[error("star-exponential series diverges (last term norm {last_term:.3e}); reduce |s|")]
    SeriesDivergence { last_term: f64 },

    #[error("evolution blew up at time {time} (norm {norm:.3e})")]
    BlowUp { time: f64, norm: f64 },

    #[error("closed form is singular at time {time}: {reason}")]
    Singular { time: f64, reason: String },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("invalid trace data: {0}")]
    InvalidTrace(String),

    #[error("complex phase branch ambiguous between tau = {tau_lo} and tau = {tau_hi}; use a denser schedule")]
    BranchTracking { tau_lo: f64, tau_hi: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
