use thiserror::Error;

/// Errors raised by manifold operations, the estimator and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point or argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A retraction produced (or would produce) a point off the manifold.
    #[error("degenerate retraction: {0}")]
    DegenerateRetraction(String),

    /// The objective returned NaN or an infinity at a probe point.
    #[error("objective returned {value} at probe point {probe:?}")]
    NonFiniteObjective { value: f64, probe: Vec<f64> },

    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A runtime invariant of the algorithm failed.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Invalid solver configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
