use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::manifold::Point;

/// Which branch produced an outer iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Descent,
    TangentStep,
    /// The iteration that produced the returned point.
    Output,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Descent => "descent",
            Branch::TangentStep => "tangent_step",
            Branch::Output => "output",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientSmallOutput,
    OuterBudget,
    QueryBudget,
    /// The asymptotic tangent step hit its safety cap.
    Degenerate,
    WallClock,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::GradientSmallOutput => "gradient_small_output",
            Termination::OuterBudget => "outer_budget",
            Termination::QueryBudget => "query_budget",
            Termination::Degenerate => "degenerate",
            Termination::WallClock => "wall_clock",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub outer_iter: usize,
    pub branch: Branch,
    /// Objective at the new iterate (uncounted evaluation).
    pub f_value: f64,
    pub cumulative_queries: u64,
    pub trigger_fired: Option<bool>,
    pub inner_iters: Option<usize>,
}

/// Per-outer-iteration history of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub initial_value: f64,
    pub final_point: Point,
    pub termination: Termination,
    /// Queries consumed by one gradient estimate (`2d`, or `2n` for the
    /// projected baseline).
    pub queries_per_estimate: u64,
}

pub const CSV_HEADER: &str = "iter,branch,f,queries,trigger,inner_iters";

impl Trace {
    pub fn final_value(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.f_value)
            .unwrap_or(self.initial_value)
    }

    pub fn total_queries(&self) -> u64 {
        self.records
            .last()
            .map(|r| r.cumulative_queries)
            .unwrap_or(0)
    }

    /// Query count implied by the records: one estimate per outer iteration
    /// plus one per inner iteration.
    pub fn expected_queries(&self) -> u64 {
        self.records
            .iter()
            .map(|r| self.queries_per_estimate * (1 + r.inner_iters.unwrap_or(0) as u64))
            .sum()
    }

    /// Smallest recorded query count at which `f <= target`.
    pub fn queries_to_reach(&self, target: f64) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.f_value <= target)
            .map(|r| r.cumulative_queries)
    }

    pub fn best_value(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.f_value)
            .fold(self.initial_value, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let trigger = r.trigger_fired.map(|t| t.to_string()).unwrap_or_default();
            let inner = r.inner_iters.map(|k| k.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.outer_iter, r.branch, r.f_value, r.cumulative_queries, trigger, inner
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}
