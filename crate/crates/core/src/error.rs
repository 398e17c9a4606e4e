use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    #[error("{name} = {value} lies outside [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("adaptive quadrature on [{a}, {b}] exceeded depth {depth} before reaching tolerance {tol:e}")]
    QuadratureFailure { a: f64, b: f64, tol: f64, depth: u32 },

    #[error("no sign change bracketed in [{lo}, {hi}]")]
    RootNotFound { lo: f64, hi: f64 },

    #[error("threshold {name} = {value} must be positive")]
    InvalidThreshold { name: &'static str, value: f64 },

    #[error("threshold ordering violated: {0}")]
    ThresholdOrdering(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error(transparent)]
    Expr(#[from] ParseError),
}
