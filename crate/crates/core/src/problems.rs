//! Built-in benchmark objectives and finite-difference stationarity checks.
//!
//! * [`QuarticProblem`]: `1/4 sum x_i^4 - y sum x_i + (d/2) y^2` on `R^{d+1}`,
//!   with a strict saddle at the origin and minima `+-(1, ..., 1)` of value
//!   `-d/4`.
//! * [`SimplexLsProblem`]: least squares `|Ax - b|^2` over the simplex.
//! * [`SphereQuadraticProblem`]: the Rayleigh quotient `x^T M x` on the
//!   sphere. This is a synthetic stand-in for sphere-constrained objectives
//!   without closed form; its minimum is the smallest eigenvalue of `M`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuarticProblem {
    d: usize,
}

impl QuarticProblem {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("quartic problem needs d >= 1".into()));
        }
        Ok(Self { d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn manifold(&self) -> Manifold {
        Manifold::euclidean(self.d + 1)
    }

    /// The strict saddle at the origin.
    pub fn saddle(&self) -> Point {
        Point::new(DVector::zeros(self.d + 1))
    }

    pub fn global_min_value(&self) -> f64 {
        -(self.d as f64) / 4.0
    }

    /// `z = (x_1, ..., x_d, y)`.
    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        let d = self.d;
        let y = z[d];
        let xs = z.rows(0, d);
        let quartic: f64 = xs.iter().map(|x| x.powi(4)).sum();
        0.25 * quartic - y * xs.sum() + 0.5 * d as f64 * y * y
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let d = self.d;
        let y = z[d];
        let mut g = DVector::zeros(d + 1);
        for i in 0..d {
            g[i] = z[i].powi(3) - y;
        }
        g[d] = -z.rows(0, d).sum() + d as f64 * y;
        g
    }
}

/// Simplex-constrained least squares, `min |Ax - b|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLsProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// The planted coefficient vector (sums to one).
    pub zeta: DVector<f64>,
    pub seed: u64,
}

pub const DEFAULT_LS_NOISE: f64 = 0.1;

/// Draws `A` with iid standard normal entries, `zeta` normal and shifted so
/// that it sums to one, and `b = A zeta + noise`.
pub fn gen_ls_data(m: usize, d: usize, seed: u64, noise_sd: f64) -> Result<SimplexLsProblem> {
    if m == 0 || d < 2 {
        return Err(Error::Domain(format!(
            "need m >= 1 and d >= 2, got m={m}, d={d}"
        )));
    }
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|e| Error::Domain(format!("invalid noise level {noise_sd}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, d, |_, _| StandardNormal.sample(&mut rng));
    let mut zeta = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
    let shift = (1.0 - zeta.sum()) / d as f64;
    zeta.add_scalar_mut(shift);
    let eps = DVector::from_fn(m, |_, _| noise.sample(&mut rng));
    let b = &a * &zeta + eps;
    Ok(SimplexLsProblem { a, b, zeta, seed })
}

impl SimplexLsProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() || a.ncols() < 2 {
            return Err(Error::Domain(
                "A must be m x d with d >= 2 and b of length m".into(),
            ));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("A and b must be finite".into()));
        }
        let d = a.ncols();
        Ok(Self {
            a,
            b,
            zeta: DVector::from_element(d, 1.0 / d as f64),
            seed: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn manifold(&self) -> Manifold {
        Manifold::simplex(self.dim())
    }

    pub fn barycentre(&self) -> Point {
        let d = self.dim();
        Point::new(DVector::from_element(d, 1.0 / d as f64))
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).norm_squared()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (&self.a * x - &self.b) * 2.0
    }
}

/// Rayleigh quotient on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadraticProblem {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl SphereQuadraticProblem {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::Domain("matrix must be square with size >= 2".into()));
        }
        if (&matrix - matrix.transpose()).amax() > 1e-12 {
            return Err(Error::Domain("matrix must be symmetric".into()));
        }
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self {
            matrix,
            eigenvalues,
        })
    }

    /// `M = (G + G^T) / 2` with `G` standard normal.
    pub fn random(d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        Self::new((&g + g.transpose()) * 0.5)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ascending eigenvalues of `M`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_value(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn manifold(&self) -> Manifold {
        Manifold::sphere(self.matrix.nrows())
    }

    /// `(1, ..., 1) / sqrt(d)`.
    pub fn default_start(&self) -> Point {
        let d = self.matrix.nrows();
        Point::new(DVector::from_element(d, 1.0 / (d as f64).sqrt()))
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * x))
    }
}

/// Finite-difference first- and second-order information of the pullback
/// at `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub grad_norm: f64,
    pub hess_min_eig: f64,
    pub fd_step: f64,
}

pub const DEFAULT_FD_STEP: f64 = 1e-4;

impl StationarityReport {
    /// `|grad| <= epsilon`.
    pub fn is_first_order(&self, epsilon: f64) -> bool {
        self.grad_norm <= epsilon
    }

    /// Additionally `lambda_min(Hess) >= -sqrt(rho epsilon)`.
    pub fn is_second_order(&self, epsilon: f64, rho: f64) -> bool {
        self.is_first_order(epsilon) && self.hess_min_eig >= -(rho * epsilon).sqrt()
    }
}

/// Central-difference gradient of the pullback along the tangent basis.
pub fn pullback_fd_gradient<F>(f: F, m: &Manifold, x: &Point, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Contract(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let basis = m.tangent_basis(x)?;
    let d = basis.dim();
    let eval = |s: DVector<f64>| -> Result<f64> {
        let y = m.retract(&basis, &TangentVector::new(s))?;
        finite(f(y.coords()), y.coords())
    };
    let mut g = DVector::zeros(d);
    for i in 0..d {
        let mut plus = DVector::zeros(d);
        plus[i] = h;
        let minus = -&plus;
        g[i] = (eval(plus)? - eval(minus)?) / (2.0 * h);
    }
    Ok(g)
}

fn finite(v: f64, at: &DVector<f64>) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective {
            value: v,
            probe: at.iter().copied().collect(),
        })
    }
}

/// Finite-difference Hessian of the pullback at `s = 0`, symmetrised.
pub fn pullback_fd_hessian<F>(f: F, m: &Manifold, x: &Point, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Contract(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let basis = m.tangent_basis(x)?;
    let d = basis.dim();
    let eval = |si: f64, i: usize, sj: f64, j: usize| -> Result<f64> {
        let mut s = DVector::zeros(d);
        s[i] += si * h;
        s[j] += sj * h;
        let y = m.retract(&basis, &TangentVector::new(s))?;
        finite(f(y.coords()), y.coords())
    };
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = (eval(1.0, i, 1.0, j)? - eval(1.0, i, -1.0, j)? - eval(-1.0, i, 1.0, j)?
                + eval(-1.0, i, -1.0, j)?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

pub fn stationarity_report<F>(
    f: F,
    m: &Manifold,
    x: &Point,
    fd_step: f64,
) -> Result<StationarityReport>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let g = pullback_fd_gradient(&f, m, x, fd_step)?;
    let hess = pullback_fd_hessian(&f, m, x, fd_step)?;
    let hess_min_eig = SymmetricEigen::new(hess).eigenvalues.min();
    Ok(StationarityReport {
        grad_norm: g.norm(),
        hess_min_eig,
        fd_step,
    })
}

/// Halving the step changes the gradient norm by less than 25% (or both
/// norms are at round-off level).
pub fn fd_step_is_stable<F>(f: F, m: &Manifold, x: &Point, fd_step: f64) -> Result<bool>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let a = pullback_fd_gradient(&f, m, x, fd_step)?.norm();
    let b = pullback_fd_gradient(&f, m, x, fd_step / 2.0)?.norm();
    let scale = a.max(b);
    Ok(scale < 1e-8 || (a - b).abs() < 0.25 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quartic_values() {
        let p = QuarticProblem::new(20).unwrap();
        assert_eq!(p.eval(&DVector::zeros(21)), 0.0);
        assert_abs_diff_eq!(
            p.eval(&DVector::from_element(21, 1.0)),
            -5.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(p.global_min_value(), -5.0);
        let z = DVector::from_fn(21, |i, _| (i as f64 * 0.37).sin());
        assert_abs_diff_eq!(p.eval(&z), p.eval(&-&z), epsilon = 1e-14);
        assert_eq!(p.gradient(&DVector::from_element(21, 1.0)).amax(), 0.0);
        assert!(QuarticProblem::new(0).is_err());
    }

    #[test]
    fn ls_generation() {
        let p = gen_ls_data(200, 20, 17, DEFAULT_LS_NOISE).unwrap();
        let q = gen_ls_data(200, 20, 17, DEFAULT_LS_NOISE).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.a.shape(), (200, 20));
        assert!((p.zeta.sum() - 1.0).abs() <= 1e-12);
        let r = gen_ls_data(200, 20, 18, DEFAULT_LS_NOISE).unwrap();
        assert_ne!(p.a, r.a);
    }

    #[test]
    fn ls_values() {
        let d = 4;
        let p = SimplexLsProblem::new(DMatrix::identity(d, d), DVector::zeros(d)).unwrap();
        assert_abs_diff_eq!(p.eval(p.barycentre().coords()), 0.25, epsilon = 1e-15);
        let a = DMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        let x = DVector::from_column_slice(&[0.3, 0.7]);
        let b = &a * &x;
        let p = SimplexLsProblem::new(a, b).unwrap();
        assert_eq!(p.eval(&x), 0.0);
    }

    #[test]
    fn sphere_quadratic_values() {
        let p =
            SphereQuadraticProblem::new(DMatrix::from_diagonal(&DVector::from_column_slice(&[
                1.0, 5.0,
            ])))
            .unwrap();
        assert_eq!(p.eval(&DVector::from_column_slice(&[1.0, 0.0])), 1.0);
        assert_eq!(p.min_value(), 1.0);
        let id = SphereQuadraticProblem::new(DMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(id.eval(id.default_start().coords()), 1.0, epsilon = 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SphereQuadraticProblem::new(bad).is_err());
    }

    #[test]
    fn quartic_origin_is_a_strict_saddle() {
        let p = QuarticProblem::new(2).unwrap();
        let report = stationarity_report(|z| p.eval(z), &p.manifold(), &p.saddle(), 1e-3).unwrap();
        assert!(report.grad_norm <= 1e-6);
        // Analytic Hessian [[0,0,-1],[0,0,-1],[-1,-1,2]] has lambda_min = 1 - sqrt(3).
        assert_abs_diff_eq!(report.hess_min_eig, 1.0 - 3f64.sqrt(), epsilon = 1e-5);
        assert!(report.is_first_order(0.01));
        assert!(!report.is_second_order(0.01, 1.0));
    }

    #[test]
    fn bowl_minimum() {
        let m = Manifold::euclidean(3);
        let report = stationarity_report(
            |z: &DVector<f64>| 0.5 * z.norm_squared(),
            &m,
            &Point::new(DVector::zeros(3)),
            DEFAULT_FD_STEP,
        )
        .unwrap();
        assert!(report.grad_norm < 1e-12);
        assert_abs_diff_eq!(report.hess_min_eig, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rayleigh_maximiser_is_not_second_order() {
        let p =
            SphereQuadraticProblem::new(DMatrix::from_diagonal(&DVector::from_column_slice(&[
                1.0, 5.0,
            ])))
            .unwrap();
        let top = Point::from_slice(&[0.0, 1.0]);
        let report =
            stationarity_report(|z| p.eval(z), &p.manifold(), &top, DEFAULT_FD_STEP).unwrap();
        assert!(report.grad_norm < 1e-8);
        // Pullback (x + c e)^T M (x + c e) / (1 + c^2) has curvature 2 (1 - 5).
        assert_abs_diff_eq!(report.hess_min_eig, -8.0, epsilon = 1e-4);
        assert!(fd_step_is_stable(
            |z| p.eval(z),
            &p.manifold(),
            &Point::from_slice(&[0.6, 0.8]),
            DEFAULT_FD_STEP
        )
        .unwrap());
    }
}
