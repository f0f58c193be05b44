use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{error_bound, SmoothingSchedule};

/// All parameters of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Step size.
    pub eta: f64,
    /// Momentum damping; `1 - theta` multiplies the extrapolation term.
    pub theta: f64,
    /// Trigger radius of the tangent-space step.
    pub big_b: f64,
    /// Inner iteration budget of the fixed tangent-space step.
    pub cap_k: usize,
    /// Radius of the initial perturbation in the tangent-space step.
    pub r: f64,
    /// Radius of the ball on which the pullback is Lipschitz.
    pub b: f64,
    /// Gradient Lipschitz constant of the pullback.
    pub l: f64,
    /// Hessian Lipschitz constant of the pullback.
    pub rho: f64,
    /// Smoothing for the outer estimator, indexed by outer iteration.
    pub mu_outer: SmoothingSchedule,
    /// Smoothing for the inner estimators, indexed by inner iteration.
    pub mu_inner: SmoothingSchedule,
    pub epsilon: f64,
    pub chi: f64,
    pub delta: f64,
    pub max_outer: usize,
    pub query_budget: u64,
    pub seed: u64,
    /// Advisory wall-clock limit, checked between outer iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

pub const DEFAULT_MAX_OUTER: usize = 100_000;
pub const DEFAULT_QUERY_BUDGET: u64 = 10_000_000;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eta", self.eta),
            ("big_b", self.big_b),
            ("b", self.b),
            ("l", self.l),
            ("rho", self.rho),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::Config(format!(
                "r must be non-negative, got {}",
                self.r
            )));
        }
        if !(self.chi >= 1.0 && self.chi.is_finite()) {
            return Err(Error::Config(format!("chi must be >= 1, got {}", self.chi)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.cap_k == 0 {
            return Err(Error::Config("cap_k must be at least 1".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::Config("max_outer must be at least 1".into()));
        }
        if self.query_budget == 0 {
            return Err(Error::Config("query_budget must be at least 1".into()));
        }
        if let Some(w) = self.wall_clock_s {
            if w.is_nan() || w <= 0.0 {
                return Err(Error::Config(format!(
                    "wall_clock_s must be positive, got {w}"
                )));
            }
        }
        self.mu_outer.validate()?;
        self.mu_inner.validate()?;
        Ok(())
    }

    /// Gradient threshold `l B` separating descent and tangent-space steps.
    pub fn threshold(&self) -> f64 {
        self.l * self.big_b
    }
}

/// Problem constants the parameter builders need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub l: f64,
    pub rho: f64,
    pub b: f64,
    /// Intrinsic dimension of the manifold.
    pub dim: usize,
}

/// Absolute constants in front of the order-of-magnitude parameter choices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Multipliers {
    pub c_out: f64,
    pub c_in: f64,
    pub c1: f64,
    pub c2: f64,
    pub k_min: usize,
}

impl Default for Multipliers {
    fn default() -> Self {
        Self {
            c_out: 1.0,
            c_in: 1.0,
            c1: 1.0,
            c2: 1.0,
            k_min: 10,
        }
    }
}

fn check_inputs(epsilon: f64, c: &ProblemConstants) -> Result<()> {
    for (name, v) in [("epsilon", epsilon), ("l", c.l), ("rho", c.rho), ("b", c.b)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if c.dim == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    Ok(())
}

/// Halves `mu` until `error_bound(mu) <= l B / 2`.
pub fn guard_mu(mu: f64, c: &ProblemConstants, big_b: f64) -> f64 {
    let target = c.l * big_b / 2.0;
    let mut mu = mu;
    while error_bound(c.l, c.rho, mu, c.dim) > target && mu > f64::MIN_POSITIVE {
        mu *= 0.5;
    }
    mu
}

fn momentum(epsilon: f64, c: &ProblemConstants) -> f64 {
    (c.rho.powf(1.75) * epsilon.powf(0.25) / c.l).min(1.0)
}

fn ceil_k(formula: f64, k_min: usize) -> usize {
    (formula.ceil() as usize).max(k_min).max(1)
}

fn base(epsilon: f64, c: &ProblemConstants) -> SolverConfig {
    SolverConfig {
        eta: 1.0 / (4.0 * c.l),
        theta: 1.0,
        big_b: 1.0,
        cap_k: 1,
        r: 0.0,
        b: c.b,
        l: c.l,
        rho: c.rho,
        mu_outer: SmoothingSchedule::constant(1.0),
        mu_inner: SmoothingSchedule::constant(1.0),
        epsilon,
        chi: 1.0,
        delta: 0.1,
        max_outer: DEFAULT_MAX_OUTER,
        query_budget: DEFAULT_QUERY_BUDGET,
        seed: 0,
        wall_clock_s: None,
    }
}

/// Parameters for first-order stationarity, unperturbed tangent steps.
pub fn params_fosp(epsilon: f64, c: &ProblemConstants, mult: &Multipliers) -> Result<SolverConfig> {
    check_inputs(epsilon, c)?;
    let d = c.dim as f64;
    let mut cfg = base(epsilon, c);
    cfg.big_b = (epsilon / c.rho).sqrt() / 8.0;
    cfg.theta = momentum(epsilon, c);
    cfg.cap_k = ceil_k(c.rho.powf(1.25) / (4.0 * epsilon.powf(0.25)), mult.k_min);
    cfg.r = 0.0;
    let mu_out = guard_mu(mult.c_out * epsilon.powf(0.25) / d.powf(0.25), c, cfg.big_b);
    cfg.mu_outer = SmoothingSchedule::constant(mu_out);
    cfg.mu_inner = SmoothingSchedule::constant(mult.c_in * epsilon.powf(0.625) / d.powf(0.25));
    cfg.validate()?;
    Ok(cfg)
}

/// `chi = max(1, ln(d / (delta epsilon)))`.
pub fn log_factor(epsilon: f64, delta: f64, dim: usize) -> f64 {
    (dim as f64 / (delta * epsilon)).ln().max(1.0)
}

/// Parameters for second-order stationarity, perturbed tangent steps.
pub fn params_sosp(
    epsilon: f64,
    delta: f64,
    c: &ProblemConstants,
    mult: &Multipliers,
) -> Result<SolverConfig> {
    check_inputs(epsilon, c)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let d = c.dim as f64;
    let chi = log_factor(epsilon, delta, c.dim);
    let mut cfg = base(epsilon, c);
    cfg.chi = chi;
    cfg.delta = delta;
    cfg.theta = momentum(epsilon, c);
    cfg.cap_k = ceil_k(
        chi * c.rho.powf(1.25) / (4.0 * epsilon.powf(0.25)),
        mult.k_min,
    );
    cfg.big_b = (epsilon / c.rho).sqrt() / (8.0 * chi * chi);
    cfg.r = cfg.theta * cfg.big_b / (6.0 * cfg.cap_k as f64);
    let mu_out = guard_mu(
        mult.c_out * epsilon.powf(0.25) / (d.powf(0.25) * chi),
        c,
        cfg.big_b,
    );
    cfg.mu_outer = SmoothingSchedule::constant(mu_out);
    let mu_in = (mult.c1 * epsilon.powf(0.625) / (d.powf(0.25) * chi * chi))
        .min(mult.c2 * epsilon.powf(0.875) / (chi.powi(3) * d.sqrt()));
    cfg.mu_inner = SmoothingSchedule::constant(mu_in);
    cfg.validate()?;
    Ok(cfg)
}

/// Parameters for the asymptotic variant: first-order settings with a
/// decaying inner smoothing schedule.
pub fn params_asymptotic(
    epsilon: f64,
    c: &ProblemConstants,
    mult: &Multipliers,
    schedule: SmoothingSchedule,
) -> Result<SolverConfig> {
    if !schedule.is_decaying() {
        return Err(Error::Config(
            "the asymptotic variant needs a decaying schedule".into(),
        ));
    }
    let mut cfg = params_fosp(epsilon, c, mult)?;
    cfg.mu_inner = schedule;
    cfg.validate()?;
    Ok(cfg)
}

/// Parameters for plain Riemannian zeroth-order gradient descent:
/// `eta = 1/(4l)`, `B = epsilon/(2l)`, smoothing guarded so the estimator
/// error stays below `epsilon/4`.
pub fn params_rzgd(epsilon: f64, c: &ProblemConstants, mult: &Multipliers) -> Result<SolverConfig> {
    check_inputs(epsilon, c)?;
    let d = c.dim as f64;
    let mut cfg = base(epsilon, c);
    cfg.big_b = epsilon / (2.0 * c.l);
    let mu = guard_mu(mult.c_out * epsilon.sqrt() / d.powf(0.25), c, cfg.big_b);
    cfg.mu_outer = SmoothingSchedule::constant(mu);
    cfg.mu_inner = SmoothingSchedule::constant(mu);
    cfg.validate()?;
    Ok(cfg)
}
