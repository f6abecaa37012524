use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (negative time,
    /// position outside `[0, 1]`, non-positive step, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A hypothesis of an inequality or construction is not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative oracle did not converge within its iteration cap.
    #[error("oracle failed to converge after {iterations} iterations (last sup-distance {residual:e})")]
    OracleFailure { iterations: usize, residual: f64 },

    /// A search for a constant making an inequality hold came up empty.
    #[error("counterexample: {0}")]
    Counterexample(String),

    /// A sampled hypothesis check found the coefficient infeasible.
    #[error("hypothesis {hypothesis} violated: {detail}")]
    HypothesisViolation {
        hypothesis: &'static str,
        detail: String,
    },

    /// Adaptive quadrature did not reach its target accuracy.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// A simulation diverged where the experiment requires it not to.
    #[error("blow-up: {0}")]
    BlowUp(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
