use thiserror::Error;

/// Errors raised by the exact pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: argument outside the domain ({detail})")]
    Domain { op: &'static str, detail: String },

    #[error("{op}: pole at {detail}")]
    Pole { op: &'static str, detail: String },

    #[error("{op}: no convergence after {iterations} iterations (residual {residual})")]
    Convergence {
        op: &'static str,
        iterations: usize,
        residual: String,
    },

    #[error("{op}: value overflowed the precision context")]
    PrecisionOverflow { op: &'static str },

    #[error("{op}: degenerate argument ({detail})")]
    DegenerateArgument { op: &'static str, detail: String },

    #[error("factorization violated: lambda[{index}] = {value} is not in (0, 1)")]
    FactorizationViolation { index: usize, value: String },

    #[error("k = {k} is an endpoint of 0..={max}; use the exact product formula")]
    Endpoint { k: usize, max: usize },

    #[error("cross-check failed ({what}): {detail}")]
    CrossCheck { what: &'static str, detail: String },

    #[error("invalid ensemble parameters: {0}")]
    InvalidParams(String),

    #[error("invalid precision: {0}")]
    InvalidPrecision(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
