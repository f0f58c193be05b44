//! Pullback evaluation and the coordinate-wise zeroth-order gradient
//! estimator.
//!
//! Every objective evaluation that the solvers perform goes through
//! [`Objective::eval`], which is the only place the [`QueryCounter`] is
//! advanced. [`Objective::peek`] evaluates without counting and is reserved
//! for trace bookkeeping.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, TangentBasis, TangentVector};

/// Monotone count of objective evaluations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct QueryCounter(u64);

impl QueryCounter {
    pub fn count(&self) -> u64 {
        self.0
    }

    fn bump(&mut self) {
        self.0 += 1;
    }
}

/// An objective function paired with its query counter.
pub struct Objective<F> {
    func: F,
    counter: QueryCounter,
}

impl<F> Objective<F>
where
    F: Fn(&DVector<f64>) -> f64,
{
    pub fn new(func: F) -> Self {
        Self {
            func,
            counter: QueryCounter::default(),
        }
    }

    /// Counted evaluation. Non-finite values are reported with the probe.
    pub fn eval(&mut self, z: &DVector<f64>) -> Result<f64> {
        self.counter.bump();
        let value = (self.func)(z);
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective {
                value,
                probe: z.iter().copied().collect(),
            });
        }
        Ok(value)
    }

    /// Uncounted evaluation, for recording traces only.
    pub fn peek(&self, z: &DVector<f64>) -> f64 {
        (self.func)(z)
    }

    pub fn counter(&self) -> QueryCounter {
        self.counter
    }

    pub fn queries(&self) -> u64 {
        self.counter.count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleMode {
    Constant,
    /// `mu_{k+1} = beta mu_k`.
    Geometric(f64),
    /// `mu_{k+1} = (1 - 1/(k+2)) mu_k`.
    Harmonic,
}

/// Sequence of smoothing parameters `mu_0, mu_1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSchedule {
    pub mu0: f64,
    pub mode: ScheduleMode,
}

impl SmoothingSchedule {
    pub fn constant(mu0: f64) -> Self {
        Self {
            mu0,
            mode: ScheduleMode::Constant,
        }
    }

    pub fn geometric(mu0: f64, beta: f64) -> Self {
        Self {
            mu0,
            mode: ScheduleMode::Geometric(beta),
        }
    }

    pub fn harmonic(mu0: f64) -> Self {
        Self {
            mu0,
            mode: ScheduleMode::Harmonic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(Error::Config(format!(
                "mu0 must be positive, got {}",
                self.mu0
            )));
        }
        if let ScheduleMode::Geometric(beta) = self.mode {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Config(format!(
                    "beta must lie in (0, 1), got {beta}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_decaying(&self) -> bool {
        !matches!(self.mode, ScheduleMode::Constant)
    }

    /// `mu_k` in closed form. The harmonic product telescopes to `mu0/(k+1)`.
    pub fn at(&self, k: usize) -> f64 {
        match self.mode {
            ScheduleMode::Constant => self.mu0,
            ScheduleMode::Geometric(beta) => self.mu0 * beta.powi(k as i32),
            ScheduleMode::Harmonic => self.mu0 / (k as f64 + 1.0),
        }
    }
}

/// `f(Retr_x(s))`, one counted query.
pub fn pullback_eval<F>(
    f: &mut Objective<F>,
    m: &Manifold,
    basis: &TangentBasis,
    s: &TangentVector,
) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let y = m.retract(basis, s)?;
    f.eval(y.coords())
}

/// Central differences of the pullback along each basis direction:
/// `g_i = (f^(s + mu e_i) - f^(s - mu e_i)) / (2 mu)`. Costs exactly `2d`
/// queries.
pub fn zo_gradient<F>(
    f: &mut Objective<F>,
    m: &Manifold,
    basis: &TangentBasis,
    s: &TangentVector,
    mu: f64,
) -> Result<TangentVector>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::Contract(format!(
            "smoothing parameter must be positive, got {mu}"
        )));
    }
    let d = basis.dim();
    let mut g = DVector::zeros(d);
    let mut probe = s.coeffs().clone();
    for i in 0..d {
        let base = probe[i];
        probe[i] = base + mu;
        let plus = pullback_eval(f, m, basis, &TangentVector::new(probe.clone()))?;
        probe[i] = base - mu;
        let minus = pullback_eval(f, m, basis, &TangentVector::new(probe.clone()))?;
        probe[i] = base;
        g[i] = (plus - minus) / (2.0 * mu);
    }
    Ok(TangentVector::new(g))
}

/// Coordinate-wise central differences in the ambient space, `2n` queries.
pub fn euclidean_zo_gradient<F>(
    f: &mut Objective<F>,
    z: &DVector<f64>,
    mu: f64,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::Contract(format!(
            "smoothing parameter must be positive, got {mu}"
        )));
    }
    let n = z.len();
    let mut g = DVector::zeros(n);
    let mut probe = z.clone();
    for i in 0..n {
        let base = probe[i];
        probe[i] = base + mu;
        let plus = f.eval(&probe)?;
        probe[i] = base - mu;
        let minus = f.eval(&probe)?;
        probe[i] = base;
        g[i] = (plus - minus) / (2.0 * mu);
    }
    Ok(g)
}

/// Upper bound on the estimator error,
/// `min(l mu sqrt(d) / 2, rho mu^2 sqrt(d) / 6)`.
pub fn error_bound(l: f64, rho: f64, mu: f64, d: usize) -> f64 {
    let sd = (d as f64).sqrt();
    (l * mu * sd / 2.0).min(rho * mu * mu * sd / 6.0)
}
