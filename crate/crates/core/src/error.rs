use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point or parameter lies outside the admissible chart or range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed arguments (dimension mismatch, non-symmetric matrix, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A root-finding bracket could not be established.
    #[error("no solution found in bracket: {0}")]
    Bracket(String),

    /// The shooting profile lost positivity before reaching the boundary.
    #[error("infeasible profile: {0}")]
    Infeasible(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// An empirically asserted structural property failed.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Policy iteration stopped above tolerance.
    #[error("policy iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    Convergence { residual: f64, iterations: usize },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    /// CSV or config parse failure, 1-based row and column.
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
