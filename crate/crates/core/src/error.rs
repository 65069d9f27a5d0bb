//! Error type shared by every module of the crate.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Diagnostics attached to a quadrature that failed to reach its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDiagnostics {
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
    pub error_estimate: f64,
    pub subintervals: usize,
}

impl fmt::Display for QuadratureDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "on [{:e}, {:e}]: estimate {:e} with error {:e} after {} subintervals",
            self.lower, self.upper, self.estimate, self.error_estimate, self.subintervals
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution or link parameter is outside its admissible range.
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// Malformed data handed to an operation (empty sample, bad lengths, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Invalid configuration document or CLI arguments.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature did not converge {0}")]
    Quadrature(QuadratureDiagnostics),

    /// The Fisher information matrix cannot be inverted reliably.
    #[error("singular Fisher information (condition number {condition:e}); deficient directions: {directions}")]
    Singular { condition: f64, directions: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate risk specification: {0}")]
    DegenerateRisk(String),

    /// No design satisfied every constraint.
    #[error("no feasible plan found (best |residual| = {best_residual:e}): {detail}")]
    Infeasible { best_residual: f64, detail: String },

    #[error("allocation error: {0}")]
    Allocation(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("model comparison error: {0}")]
    Comparison(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for input/configuration problems,
    /// 3 for numerical failures and infeasibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Input(_) | Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
