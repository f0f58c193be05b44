//! The descent step and the two tangent-space steps.
//!
//! Both tangent-space steps run accelerated gradient descent on the pullback
//! `f^_x = f o Retr_x` inside a single tangent space, using
//!
//! ```text
//! y^k     = s^k + (1 - theta) (s^k - s^{k-1})
//! s^{k+1} = y^k - eta g_x(y^k; mu)
//! ```
//!
//! and stop once `k sum_{j<k} |s^{j+1} - s^j|^2 > B^2`. While that trigger
//! has not fired, Cauchy-Schwarz gives `|s^k - s^0| <= B` and
//! `|y^k - s^0| <= 2B`; both bounds are checked at every step.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{zo_gradient, Objective, SmoothingSchedule};
use crate::manifold::{Manifold, Point, TangentBasis, TangentVector};
use crate::solvers::config::SolverConfig;

const RADIUS_SLACK: f64 = 1e-9;

/// Gradient step in the tangent space, shortened so its length is at most
/// `b`.
pub fn rzgds_step(
    m: &Manifold,
    basis: &TangentBasis,
    g: &TangentVector,
    eta: f64,
    b: f64,
) -> Result<Point> {
    if g.iter().any(|c| !c.is_finite()) {
        return Err(Error::Contract("gradient estimate is not finite".into()));
    }
    let norm = g.norm();
    if norm == 0.0 {
        return Ok(basis.at().clone());
    }
    let step = if eta * norm <= b { eta } else { b / norm };
    m.retract(basis, &TangentVector::new(g.coeffs() * -step))
}

/// Result of a tangent-space step.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentStepOutcome {
    pub point: Point,
    /// The displacement trigger fired.
    pub triggered: bool,
    /// Inner gradient estimates computed.
    pub inner_iters: usize,
    /// The loop stopped on its iteration cap or the query budget rather
    /// than on its own exit condition (asymptotic variant only).
    pub capped: bool,
    pub budget_exhausted: bool,
    /// Largest `|s^k - s^0| / B` observed before the trigger.
    pub max_s_ratio: f64,
    /// Largest `|y^k - s^0| / (2B)` observed before the trigger.
    pub max_y_ratio: f64,
}

/// History of one inner loop.
struct InnerRun {
    s0: DVector<f64>,
    s_curr: DVector<f64>,
    ys: Vec<DVector<f64>>,
    step_norms: Vec<f64>,
    disp_sq_sum: f64,
    triggered: bool,
    capped: bool,
    budget_exhausted: bool,
    max_s_ratio: f64,
    max_y_ratio: f64,
}

impl InnerRun {
    fn iterations(&self) -> usize {
        self.step_norms.len()
    }

    /// `y* = mean(y^0..=y^{K0})` with `K0` the smallest minimiser of the step
    /// norm over `floor(K/2) <= k <= K-1`.
    fn averaged(&self) -> DVector<f64> {
        let k = self.iterations();
        debug_assert!(k >= 1);
        let lo = k / 2;
        let mut k0 = lo;
        for j in lo..k {
            if self.step_norms[j] < self.step_norms[k0] {
                k0 = j;
            }
        }
        let mut sum = DVector::zeros(self.s0.len());
        for y in &self.ys[..=k0] {
            sum += y;
        }
        sum / (k0 + 1) as f64
    }
}

struct InnerLimits {
    max_iters: usize,
    stop_on_trigger: bool,
    query_limit: Option<u64>,
}

fn run_inner<F>(
    f: &mut Objective<F>,
    m: &Manifold,
    basis: &TangentBasis,
    cfg: &SolverConfig,
    s0: DVector<f64>,
    mu: impl Fn(usize) -> f64,
    limits: InnerLimits,
) -> Result<InnerRun>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let big_b = cfg.big_b;
    let b_sq = big_b * big_b;
    let momentum = 1.0 - cfg.theta;
    let per_estimate = 2 * basis.dim() as u64;
    let mut run = InnerRun {
        s0: s0.clone(),
        s_curr: s0.clone(),
        ys: Vec::new(),
        step_norms: Vec::new(),
        disp_sq_sum: 0.0,
        triggered: false,
        capped: false,
        budget_exhausted: false,
        max_s_ratio: 0.0,
        max_y_ratio: 0.0,
    };
    let mut s_prev = s0;
    let mut k = 0usize;
    while k < limits.max_iters {
        if let Some(limit) = limits.query_limit {
            if f.queries() + per_estimate > limit {
                run.capped = true;
                run.budget_exhausted = true;
                return Ok(run);
            }
        }
        let y = &run.s_curr + (&run.s_curr - &s_prev) * momentum;
        let y_dev = (&y - &run.s0).norm();
        run.max_y_ratio = run.max_y_ratio.max(y_dev / (2.0 * big_b));
        if y_dev > 2.0 * big_b * (1.0 + RADIUS_SLACK) {
            return Err(Error::Invariant(format!(
                "|y^{k} - s^0| = {y_dev:e} exceeds 2B = {:e}",
                2.0 * big_b
            )));
        }
        let yv = TangentVector::new(y);
        let g = zo_gradient(f, m, basis, &yv, mu(k))?;
        let y = yv.into_inner();
        let s_next = &y - g.coeffs() * cfg.eta;
        let step = (&s_next - &run.s_curr).norm();
        run.ys.push(y);
        run.step_norms.push(step);
        run.disp_sq_sum += step * step;
        s_prev = std::mem::replace(&mut run.s_curr, s_next);
        k += 1;
        if k as f64 * run.disp_sq_sum > b_sq {
            run.triggered = true;
            if limits.stop_on_trigger {
                return Ok(run);
            }
            break;
        }
        let s_dev = (&run.s_curr - &run.s0).norm();
        run.max_s_ratio = run.max_s_ratio.max(s_dev / big_b);
        if s_dev > big_b * (1.0 + RADIUS_SLACK) {
            return Err(Error::Invariant(format!(
                "|s^{k} - s^0| = {s_dev:e} exceeds B = {big_b:e} before the trigger"
            )));
        }
    }
    if !run.triggered {
        run.capped = true;
    }
    Ok(run)
}

fn check_average(y_star: &DVector<f64>, run: &InnerRun, big_b: f64) -> Result<()> {
    let dev = (y_star - &run.s0).norm();
    if dev > 2.0 * big_b * (1.0 + RADIUS_SLACK) {
        return Err(Error::Invariant(format!(
            "averaged iterate lies {dev:e} from s^0, beyond 2B = {:e}",
            2.0 * big_b
        )));
    }
    Ok(())
}

/// Tangent-space step with a fixed inner budget `K` and an optional
/// perturbation `s^0 ~ Uni(B(0, r))`.
pub fn tss<F, R>(
    f: &mut Objective<F>,
    m: &Manifold,
    basis: &TangentBasis,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<TangentStepOutcome>
where
    F: Fn(&DVector<f64>) -> f64,
    R: Rng + ?Sized,
{
    let s0 = m.sample_ball(cfg.r, rng).into_inner();
    let schedule = cfg.mu_inner;
    let run = run_inner(
        f,
        m,
        basis,
        cfg,
        s0,
        |k| schedule.at(k),
        InnerLimits {
            max_iters: cfg.cap_k,
            stop_on_trigger: true,
            query_limit: None,
        },
    )?;
    let inner_iters = run.iterations();
    let point = if run.triggered {
        m.retract(basis, &TangentVector::new(run.s_curr.clone()))?
    } else {
        let y_star = run.averaged();
        check_average(&y_star, &run, cfg.big_b)?;
        m.retract(basis, &TangentVector::new(y_star))?
    };
    Ok(TangentStepOutcome {
        point,
        triggered: run.triggered,
        inner_iters,
        capped: false,
        budget_exhausted: false,
        max_s_ratio: run.max_s_ratio,
        max_y_ratio: run.max_y_ratio,
    })
}

/// Asymptotic tangent-space step: no perturbation, runs while the
/// displacement condition holds, decaying the smoothing parameter each
/// iteration. `max_iters` is a safety cap; `query_limit` an absolute bound
/// on the counter.
pub fn tssa<F>(
    f: &mut Objective<F>,
    m: &Manifold,
    basis: &TangentBasis,
    cfg: &SolverConfig,
    schedule: &SmoothingSchedule,
    max_iters: usize,
    query_limit: Option<u64>,
) -> Result<TangentStepOutcome>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if !schedule.is_decaying() {
        return Err(Error::Contract(
            "the asymptotic tangent step needs a geometric or harmonic schedule".into(),
        ));
    }
    schedule.validate()?;
    let s0 = DVector::zeros(basis.dim());
    let run = run_inner(
        f,
        m,
        basis,
        cfg,
        s0,
        |k| schedule.at(k),
        InnerLimits {
            max_iters,
            stop_on_trigger: false,
            query_limit,
        },
    )?;
    let inner_iters = run.iterations();
    let point = match inner_iters {
        0 => basis.at().clone(),
        1 => m.retract(basis, &TangentVector::new(run.s_curr.clone()))?,
        _ => {
            let y_star = run.averaged();
            check_average(&y_star, &run, cfg.big_b)?;
            m.retract(basis, &TangentVector::new(y_star))?
        }
    };
    Ok(TangentStepOutcome {
        point,
        triggered: run.triggered,
        inner_iters,
        capped: run.capped,
        budget_exhausted: run.budget_exhausted,
        max_s_ratio: run.max_s_ratio,
        max_y_ratio: run.max_y_ratio,
    })
}
