use thiserror::Error;

/// Errors raised by the discretization, solvers and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("divergent tail: exponent {exponent} must be below {limit} for integrability")]
    DivergentTail { exponent: f64, limit: f64 },

    #[error("inadmissible pair: u2 exceeds u1 by {violation:e} at node {node} (x = {x:?})")]
    Inadmissible {
        node: usize,
        x: [f64; 2],
        violation: f64,
    },

    #[error("inconsistent problem data: {0}")]
    InconsistentData(String),

    #[error("problem too large for the dense solver: {unknowns} unknowns exceed the cap of {cap}")]
    SizeCap { unknowns: usize, cap: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("oscillation below noise floor at every radius")]
    BelowNoiseFloor,

    #[error("radius {radius} outside the admissible range [{min}, {max}]")]
    RadiusOutOfRange { radius: f64, min: f64, max: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("cache encoding: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
