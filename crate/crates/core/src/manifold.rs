//! Manifolds supported by the solvers.
//!
//! Three instances are provided, all embedded in an ambient `R^n`:
//!
//! * [`ManifoldKind::Euclidean`]: `R^n` itself with the identity retraction.
//! * [`ManifoldKind::Sphere`]: the unit sphere `S^{n-1}` with the metric
//!   retraction `(x + v) / |x + v|`.
//! * [`ManifoldKind::Simplex`]: the open probability simplex with the
//!   Shahshahani metric `g_ii(x) = |x| / x_i` and the exponential-map
//!   retraction `x_i e^{v_i} / sum_j x_j e^{v_j}`.
//!
//! Tangent vectors are stored as coefficients in a per-point basis that is
//! orthonormal under the Riemannian metric, so norms and inner products of
//! [`TangentVector`]s are plain Euclidean arithmetic on the coefficients.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the point constraints (unit norm, unit sum).
pub const POINT_TOL: f64 = 1e-12;
/// Tolerance on tangency of ambient vectors passed to [`Manifold::inner`].
pub const TANGENT_TOL: f64 = 1e-10;

const EXP_CLAMP: f64 = 700.0;
const SIMPLEX_FLOOR: f64 = 1e-300;
const SPHERE_DEGENERATE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Euclidean,
    Sphere,
    Simplex,
}

/// A manifold together with the dimension of its ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Manifold {
    kind: ManifoldKind,
    ambient_dim: usize,
}

/// A point on a manifold in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(DVector<f64>);

impl Point {
    pub fn new(coords: DVector<f64>) -> Self {
        Self(coords)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Coefficients of a tangent vector with respect to a [`TangentBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(DVector<f64>);

impl TangentVector {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn from_slice(coeffs: &[f64]) -> Self {
        Self(DVector::from_column_slice(coeffs))
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for TangentVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl From<DVector<f64>> for TangentVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

/// An orthonormal basis of the tangent space at a point.
///
/// `columns` is an `n x d` matrix whose columns are ambient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBasis {
    at: Point,
    columns: DMatrix<f64>,
}

impl TangentBasis {
    pub fn at(&self) -> &Point {
        &self.at
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    /// Ambient representation `sum_i s_i e_i` of a coefficient vector.
    pub fn to_ambient(&self, s: &TangentVector) -> DVector<f64> {
        &self.columns * s.coeffs()
    }
}

impl Manifold {
    pub fn new(kind: ManifoldKind, ambient_dim: usize) -> Result<Self> {
        let min = match kind {
            ManifoldKind::Euclidean => 1,
            ManifoldKind::Sphere | ManifoldKind::Simplex => 2,
        };
        if ambient_dim < min {
            return Err(Error::Domain(format!(
                "{kind:?} needs ambient dimension >= {min}, got {ambient_dim}"
            )));
        }
        Ok(Self { kind, ambient_dim })
    }

    /// `R^n`.
    pub fn euclidean(n: usize) -> Self {
        Self::new(ManifoldKind::Euclidean, n).expect("ambient dimension must be positive")
    }

    /// The unit sphere in `R^n`.
    pub fn sphere(n: usize) -> Self {
        Self::new(ManifoldKind::Sphere, n).expect("sphere needs ambient dimension >= 2")
    }

    /// The open probability simplex in `R^n` with the Shahshahani metric.
    pub fn simplex(n: usize) -> Self {
        Self::new(ManifoldKind::Simplex, n).expect("simplex needs ambient dimension >= 2")
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean => self.ambient_dim,
            ManifoldKind::Sphere | ManifoldKind::Simplex => self.ambient_dim - 1,
        }
    }

    /// Checks the point constraints of this manifold.
    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::Domain(format!(
                "point has {} coordinates, manifold ambient dimension is {}",
                x.len(),
                self.ambient_dim
            )));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("point has non-finite coordinates".into()));
        }
        match self.kind {
            ManifoldKind::Euclidean => Ok(()),
            ManifoldKind::Sphere => {
                let norm = x.norm();
                if (norm - 1.0).abs() > POINT_TOL {
                    return Err(Error::Domain(format!("sphere point has norm {norm}")));
                }
                Ok(())
            }
            ManifoldKind::Simplex => {
                if let Some(c) = x.iter().find(|&&c| c <= 0.0) {
                    return Err(Error::Domain(format!(
                        "simplex point has non-positive component {c}"
                    )));
                }
                let sum = x.sum();
                if (sum - 1.0).abs() > POINT_TOL {
                    return Err(Error::Domain(format!("simplex point sums to {sum}")));
                }
                Ok(())
            }
        }
    }

    /// Deterministic orthonormal basis of the tangent space at `x`.
    ///
    /// Euclidean uses the standard basis. The sphere uses a Householder
    /// reflection taking the last coordinate axis to `+-x`; its first `n-1`
    /// columns span the orthogonal complement of `x`. The simplex runs
    /// Gram-Schmidt on `e_i - e_n` under the Shahshahani inner product.
    pub fn tangent_basis(&self, x: &Point) -> Result<TangentBasis> {
        self.check_point(x)?;
        let n = self.ambient_dim;
        let columns = match self.kind {
            ManifoldKind::Euclidean => DMatrix::identity(n, n),
            ManifoldKind::Sphere => sphere_basis(x),
            ManifoldKind::Simplex => simplex_basis(x),
        };
        Ok(TangentBasis {
            at: x.clone(),
            columns,
        })
    }

    /// Retraction of a coefficient vector at the basis point.
    pub fn retract(&self, basis: &TangentBasis, s: &TangentVector) -> Result<Point> {
        if s.len() != basis.dim() {
            return Err(Error::Contract(format!(
                "tangent vector has {} coefficients, basis has {} columns",
                s.len(),
                basis.dim()
            )));
        }
        if s.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("tangent vector is not finite".into()));
        }
        let v = basis.to_ambient(s);
        self.retract_ambient(basis.at(), &v)
    }

    /// Retraction of an ambient tangent vector `v` at `x`.
    pub fn retract_ambient(&self, x: &Point, v: &DVector<f64>) -> Result<Point> {
        match self.kind {
            ManifoldKind::Euclidean => Ok(Point(x.coords() + v)),
            ManifoldKind::Sphere => {
                let y = x.coords() + v;
                let norm = y.norm();
                if norm.is_nan() || norm < SPHERE_DEGENERATE {
                    return Err(Error::DegenerateRetraction(format!(
                        "|x + v| = {norm} on the sphere"
                    )));
                }
                Ok(Point(y / norm))
            }
            ManifoldKind::Simplex => {
                let clamped = v.map(|c| c.clamp(-EXP_CLAMP, EXP_CLAMP));
                let vmax = clamped.max();
                let w = DVector::from_iterator(
                    x.len(),
                    x.iter()
                        .zip(clamped.iter())
                        .map(|(&xi, &vi)| xi * (vi - vmax).exp()),
                );
                let total = w.sum();
                if !total.is_finite() || total <= 0.0 {
                    return Err(Error::DegenerateRetraction(format!(
                        "simplex normaliser is {total}"
                    )));
                }
                let y = w / total;
                if let Some((i, c)) = y.iter().enumerate().find(|(_, &c)| c < SIMPLEX_FLOOR) {
                    return Err(Error::DegenerateRetraction(format!(
                        "simplex component {i} collapsed to {c:e}"
                    )));
                }
                Ok(Point(y))
            }
        }
    }

    /// Riemannian inner product of two ambient tangent vectors at `x`.
    pub fn inner(&self, x: &Point, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.check_tangent(x, u)?;
        self.check_tangent(x, v)?;
        Ok(match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Sphere => u.dot(v),
            ManifoldKind::Simplex => shahshahani_inner(x, u, v),
        })
    }

    fn check_tangent(&self, x: &Point, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.ambient_dim || x.len() != self.ambient_dim {
            return Err(Error::Contract(
                "dimension mismatch in inner product".into(),
            ));
        }
        let (residual, scale) = match self.kind {
            ManifoldKind::Euclidean => return Ok(()),
            ManifoldKind::Sphere => (x.dot(u), u.norm()),
            ManifoldKind::Simplex => (u.sum(), u.abs().sum()),
        };
        if residual.abs() > TANGENT_TOL * scale.max(1.0) {
            return Err(Error::Contract(format!(
                "vector is not tangent at x (residual {residual:e})"
            )));
        }
        Ok(())
    }

    /// Projection of an ambient vector onto the manifold, used by the
    /// projected baseline. For the simplex this is the Euclidean projection
    /// onto the closed simplex, so the result may have zero components.
    pub fn project_ambient(&self, p: &DVector<f64>) -> Result<Point> {
        if p.len() != self.ambient_dim {
            return Err(Error::Contract("dimension mismatch in projection".into()));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("cannot project a non-finite vector".into()));
        }
        match self.kind {
            ManifoldKind::Euclidean => Ok(Point(p.clone())),
            ManifoldKind::Sphere => {
                let norm = p.norm();
                if norm == 0.0 {
                    return Err(Error::Domain(
                        "cannot project the zero vector onto the sphere".into(),
                    ));
                }
                Ok(Point(p / norm))
            }
            ManifoldKind::Simplex => Ok(Point(project_simplex(p))),
        }
    }

    /// Uniform sample from the radius-`r` ball of the tangent space.
    ///
    /// Uses a normalised Gaussian direction and radius `r U^{1/d}`. A zero
    /// radius returns the zero vector without touching `rng`.
    pub fn sample_ball<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> TangentVector {
        let d = self.dim();
        if r <= 0.0 {
            return TangentVector::zeros(d);
        }
        let dir = loop {
            let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = g.norm();
            if norm > 0.0 {
                break g / norm;
            }
        };
        let u: f64 = rng.random();
        let radius = r * u.powf(1.0 / d as f64);
        TangentVector(dir * radius)
    }
}

fn shahshahani_inner(x: &Point, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mass = x.sum();
    x.iter()
        .zip(u.iter().zip(v.iter()))
        .map(|(&xi, (&ui, &vi))| mass / xi * ui * vi)
        .sum()
}

fn sphere_basis(x: &Point) -> DMatrix<f64> {
    let n = x.len();
    // w = x -+ e_n, picking the sign that keeps |w| >= sqrt(2).
    let mut w = x.coords().clone();
    if x[n - 1] <= 0.0 {
        w[n - 1] -= 1.0;
    } else {
        w[n - 1] += 1.0;
    }
    let wsq = w.norm_squared();
    let mut columns = DMatrix::zeros(n, n - 1);
    for j in 0..n - 1 {
        // Column j of I - 2 w w^T / |w|^2.
        let scale = 2.0 * w[j] / wsq;
        for i in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            columns[(i, j)] = delta - scale * w[i];
        }
    }
    columns
}

fn simplex_basis(x: &Point) -> DMatrix<f64> {
    let n = x.len();
    let d = n - 1;
    let mut columns = DMatrix::zeros(n, d);
    for j in 0..d {
        let mut v = DVector::zeros(n);
        v[j] = 1.0;
        v[n - 1] = -1.0;
        // Modified Gram-Schmidt, two passes.
        for _ in 0..2 {
            for k in 0..j {
                let q = columns.column(k).clone_owned();
                let proj = shahshahani_inner(x, &v, &q);
                v -= q * proj;
            }
        }
        let norm = shahshahani_inner(x, &v, &v).sqrt();
        columns.set_column(j, &(v / norm));
    }
    columns
}

/// Euclidean projection onto `{z >= 0, sum z = 1}` by sorting and
/// thresholding.
pub(crate) fn project_simplex(p: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = p.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    p.map(|c| (c - tau).max(0.0))
}
