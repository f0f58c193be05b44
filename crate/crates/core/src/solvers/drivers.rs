//! Outer loops: the accelerated method and the two baselines.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{euclidean_zo_gradient, zo_gradient, Objective};
use crate::manifold::{Manifold, Point, TangentVector};
use crate::solvers::config::SolverConfig;
use crate::solvers::tangent::{rzgds_step, tss, tssa};
use crate::solvers::trace::{Branch, Termination, Trace, TraceRecord};

/// Which tangent-space step the accelerated method uses on small gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TangentOption {
    /// Fixed inner budget `K`; the run stops at the first non-triggered step.
    I,
    /// Asymptotic step with decaying smoothing; runs until a budget is hit.
    II,
}

/// Step sizes for the projected baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    Constant(f64),
    /// `eta_t = eta_0 / sqrt(t + 1)`.
    InverseSqrt(f64),
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseSqrt(eta) => eta / (t as f64 + 1.0).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let eta = match *self {
            StepSchedule::Constant(eta) | StepSchedule::InverseSqrt(eta) => eta,
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!(
                "step size must be positive, got {eta}"
            )));
        }
        Ok(())
    }
}

/// Shared bookkeeping of the outer loops.
struct Recorder {
    records: Vec<TraceRecord>,
    started: Instant,
    deadline: Option<Duration>,
}

impl Recorder {
    fn new(cfg: &SolverConfig) -> Self {
        Self {
            records: Vec::new(),
            started: Instant::now(),
            deadline: cfg.wall_clock_s.map(Duration::from_secs_f64),
        }
    }

    fn out_of_time(&self) -> bool {
        self.deadline
            .is_some_and(|limit| self.started.elapsed() >= limit)
    }

    fn push<F>(
        &mut self,
        f: &Objective<F>,
        x: &Point,
        outer_iter: usize,
        branch: Branch,
        trigger_fired: Option<bool>,
        inner_iters: Option<usize>,
    ) -> Result<()>
    where
        F: Fn(&DVector<f64>) -> f64,
    {
        let f_value = f.peek(x.coords());
        if !f_value.is_finite() {
            return Err(Error::NonFiniteObjective {
                value: f_value,
                probe: x.iter().copied().collect(),
            });
        }
        self.records.push(TraceRecord {
            outer_iter,
            branch,
            f_value,
            cumulative_queries: f.queries(),
            trigger_fired,
            inner_iters,
        });
        Ok(())
    }

    fn finish(
        self,
        initial_value: f64,
        final_point: Point,
        termination: Termination,
        queries_per_estimate: u64,
    ) -> Trace {
        Trace {
            records: self.records,
            initial_value,
            final_point,
            termination,
            queries_per_estimate,
        }
    }
}

fn initial_value<F>(f: &Objective<F>, x0: &Point) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let v = f.peek(x0.coords());
    if !v.is_finite() {
        return Err(Error::NonFiniteObjective {
            value: v,
            probe: x0.iter().copied().collect(),
        });
    }
    Ok(v)
}

/// Riemannian accelerated zeroth-order gradient descent.
///
/// Each outer iteration estimates `g_x(0; mu)`. If `|g| >= l B` it takes a
/// (length-capped) descent step, otherwise a tangent-space step. With
/// [`TangentOption::I`] the run ends at the first tangent step whose trigger
/// does not fire; its output is the averaged inner iterate.
pub fn razgd<F>(
    f: &mut Objective<F>,
    m: &Manifold,
    x0: &Point,
    cfg: &SolverConfig,
    option: TangentOption,
) -> Result<Trace>
where
    F: Fn(&DVector<f64>) -> f64,
{
    cfg.validate()?;
    m.check_point(x0)?;
    let per_estimate = 2 * m.dim() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder::new(cfg);
    let f0 = initial_value(f, x0)?;
    let budget = f.queries() + cfg.query_budget;
    let tssa_cap = cfg.max_outer.saturating_mul(cfg.cap_k);
    // Option I never starts an outer iteration it cannot finish.
    let worst_case = match option {
        TangentOption::I => per_estimate * (1 + cfg.cap_k as u64),
        TangentOption::II => per_estimate,
    };
    let zero = TangentVector::zeros(m.dim());
    let mut x = x0.clone();

    let mut t = 0;
    let termination = loop {
        if t >= cfg.max_outer {
            break Termination::OuterBudget;
        }
        if rec.out_of_time() {
            break Termination::WallClock;
        }
        if f.queries() + worst_case > budget {
            break Termination::QueryBudget;
        }
        let basis = m.tangent_basis(&x)?;
        let g = zo_gradient(f, m, &basis, &zero, cfg.mu_outer.at(t))?;
        if g.norm() >= cfg.threshold() {
            x = rzgds_step(m, &basis, &g, cfg.eta, cfg.b)?;
            rec.push(f, &x, t, Branch::Descent, None, None)?;
        } else {
            match option {
                TangentOption::I => {
                    let out = tss(f, m, &basis, cfg, &mut rng)?;
                    x = out.point;
                    if out.triggered {
                        rec.push(
                            f,
                            &x,
                            t,
                            Branch::TangentStep,
                            Some(true),
                            Some(out.inner_iters),
                        )?;
                    } else {
                        rec.push(f, &x, t, Branch::Output, Some(false), Some(out.inner_iters))?;
                        break Termination::GradientSmallOutput;
                    }
                }
                TangentOption::II => {
                    let out = tssa(f, m, &basis, cfg, &cfg.mu_inner, tssa_cap, Some(budget))?;
                    x = out.point;
                    rec.push(
                        f,
                        &x,
                        t,
                        Branch::TangentStep,
                        Some(out.triggered),
                        Some(out.inner_iters),
                    )?;
                    if out.budget_exhausted {
                        break Termination::QueryBudget;
                    }
                    if out.capped {
                        break Termination::Degenerate;
                    }
                }
            }
        }
        t += 1;
    };
    Ok(rec.finish(f0, x, termination, per_estimate))
}

/// Riemannian zeroth-order gradient descent: descent steps while
/// `|g| >= l B`, then stop at the current iterate.
pub fn rzgd<F>(f: &mut Objective<F>, m: &Manifold, x0: &Point, cfg: &SolverConfig) -> Result<Trace>
where
    F: Fn(&DVector<f64>) -> f64,
{
    cfg.validate()?;
    m.check_point(x0)?;
    let per_estimate = 2 * m.dim() as u64;
    let mut rec = Recorder::new(cfg);
    let f0 = initial_value(f, x0)?;
    let budget = f.queries() + cfg.query_budget;
    let zero = TangentVector::zeros(m.dim());
    let mut x = x0.clone();

    let mut t = 0;
    let termination = loop {
        if t >= cfg.max_outer {
            break Termination::OuterBudget;
        }
        if rec.out_of_time() {
            break Termination::WallClock;
        }
        if f.queries() + per_estimate > budget {
            break Termination::QueryBudget;
        }
        let basis = m.tangent_basis(&x)?;
        let g = zo_gradient(f, m, &basis, &zero, cfg.mu_outer.at(t))?;
        if g.norm() >= cfg.threshold() {
            x = rzgds_step(m, &basis, &g, cfg.eta, cfg.b)?;
            rec.push(f, &x, t, Branch::Descent, None, None)?;
        } else {
            rec.push(f, &x, t, Branch::Output, None, None)?;
            break Termination::GradientSmallOutput;
        }
        t += 1;
    };
    Ok(rec.finish(f0, x, termination, per_estimate))
}

/// Euclidean projected zeroth-order gradient descent: ambient central
/// differences (`2n` queries), a gradient step, then projection back onto
/// the manifold. Runs until a budget is exhausted.
pub fn pzgd<F>(
    f: &mut Objective<F>,
    m: &Manifold,
    x0: &Point,
    cfg: &SolverConfig,
    steps: StepSchedule,
) -> Result<Trace>
where
    F: Fn(&DVector<f64>) -> f64,
{
    cfg.validate()?;
    steps.validate()?;
    if x0.len() != m.ambient_dim() {
        return Err(Error::Domain(
            "initial point has the wrong dimension".into(),
        ));
    }
    let per_estimate = 2 * m.ambient_dim() as u64;
    let mut rec = Recorder::new(cfg);
    let f0 = initial_value(f, x0)?;
    let budget = f.queries() + cfg.query_budget;
    let mut x = x0.clone();

    let mut t = 0;
    let termination = loop {
        if t >= cfg.max_outer {
            break Termination::OuterBudget;
        }
        if rec.out_of_time() {
            break Termination::WallClock;
        }
        if f.queries() + per_estimate > budget {
            break Termination::QueryBudget;
        }
        let g = euclidean_zo_gradient(f, x.coords(), cfg.mu_outer.at(t))?;
        x = m.project_ambient(&(x.coords() - g * steps.at(t)))?;
        rec.push(f, &x, t, Branch::Descent, None, None)?;
        t += 1;
    };
    Ok(rec.finish(f0, x, termination, per_estimate))
}
