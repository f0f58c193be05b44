//! The accelerated method, its subroutines, the baselines and their
//! parameter builders.

pub mod config;
pub mod drivers;
pub mod tangent;
pub mod trace;

pub use config::{
    guard_mu, log_factor, params_asymptotic, params_fosp, params_rzgd, params_sosp, Multipliers,
    ProblemConstants, SolverConfig, DEFAULT_MAX_OUTER, DEFAULT_QUERY_BUDGET,
};
pub use drivers::{pzgd, razgd, rzgd, StepSchedule, TangentOption};
pub use tangent::{rzgds_step, tss, tssa, TangentStepOutcome};
pub use trace::{Branch, Termination, Trace, TraceRecord, CSV_HEADER};
