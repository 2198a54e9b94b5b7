use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates a documented precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is malformed (negative samples, too few points, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Two objects living on different spaces were combined.
    #[error("usage error: {0}")]
    Usage(String),

    /// A kernel could not be built as requested.
    #[error("construction error: {msg} (achieved integral {achieved})")]
    Construction { msg: String, achieved: f64 },

    /// A sampled angle path jumps by at least half a turn between samples.
    #[error("sampling error: step {step} at index {index} is not below pi; refine the grid")]
    Sampling { index: usize, step: f64 },

    /// The ODE integrator gave up.
    #[error("integration failure at eps={eps:e}, t={t}: {reason}")]
    Integration { eps: f64, t: f64, reason: String },

    /// A numerical routine (quadrature, root finding) did not converge.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
