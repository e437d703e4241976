//! Error type shared by problem construction, solvers, and certification.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument's length does not match the problem dimensions.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A computed quantity overflowed or produced NaN.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// The point lies outside the set carried by the indicator term, so the
    /// tangent cone (and with it the stationarity residual) is undefined.
    #[error("point is outside the constraint set (violation {violation:.3e})")]
    InfeasiblePoint { violation: f64 },

    /// The requested operation needs a capability the problem does not
    /// provide (e.g. Hessian-vector products or a scaled subdifferential
    /// distance).
    #[error("missing capability: {0}")]
    MissingCapability(&'static str),

    /// Problem data violates a construction invariant.
    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    /// Solver or certification options violate their contract.
    #[error("invalid options: {0}")]
    InvalidOptions(String),

    /// The inner solver lost control of the subproblem (non-finite
    /// augmented Lagrangian or a collapsed line search). Raising the penalty
    /// more slowly or shrinking the initial step usually helps.
    #[error("inner solver diverged: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
