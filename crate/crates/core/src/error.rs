use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("surface is not uniformly spacelike: gradient bound {bound} must stay below {limit}")]
    NotSpacelike { bound: f64, limit: f64 },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("four-vector is off the mass shell (residual {residual:e})")]
    OffShell { residual: f64 },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("states live on different momentum grids")]
    GridMismatch,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("kernel matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    KernelDefect { asymmetry: f64 },

    #[error("density is not finite at x = {point:?}")]
    NonFiniteDensity { point: [f64; 3] },

    #[error("double sum over {nodes} nodes per axis exceeds the budget of {budget}; use the factorized or Monte Carlo path")]
    BudgetExceeded { nodes: usize, budget: usize },

    #[error("quadrature did not converge: value {value}, error estimate {error}")]
    NonConvergence { value: f64, error: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("surfaces do not agree on the region: {0}")]
    Misconfigured(String),
}

pub type Result<T> = std::result::Result<T, Error>;
