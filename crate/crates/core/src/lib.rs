//! Zeroth-order optimization on Riemannian manifolds.
//!
//! The crate implements an accelerated derivative-free method for smooth
//! nonconvex objectives: outer iterations alternate between a length-capped
//! gradient step (when the estimated Riemannian gradient is large) and an
//! accelerated inner loop run inside a single tangent space (when it is
//! small). Gradients are estimated by central differences of the pullback
//! `f o Retr_x` along an orthonormal tangent basis, so every run reports an
//! exact count of objective evaluations.
//!
//! * [`manifold`]: Euclidean space, the unit sphere and the probability
//!   simplex with the Shahshahani metric.
//! * [`estimator`]: query-counted objectives and the gradient estimator.
//! * [`solvers`]: the accelerated method, its tangent-space steps, the
//!   plain and projected baselines, and parameter builders.
//! * [`problems`]: benchmark objectives and stationarity diagnostics.
//! * [`harness`]: JSON experiment specs, seeded batches and CSV output.
//! * [`batch`]: run-level parallelism with a sequential fallback.

pub mod batch;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod manifold;
pub mod problems;
pub mod solvers;

pub use error::{Error, Result};
pub use estimator::{
    error_bound, pullback_eval, zo_gradient, Objective, QueryCounter, SmoothingSchedule,
};
pub use manifold::{Manifold, ManifoldKind, Point, TangentBasis, TangentVector};
