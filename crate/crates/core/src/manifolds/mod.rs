//! Compact embedded submanifolds: the unit sphere `S^{n-1} ⊂ R^n` and the
//! Stiefel manifold `St(n, p) ⊂ R^{n×p}`.
//!
//! Points and tangent vectors are flat ambient vectors. Stiefel matrices are
//! stored row-major, so entry `(i, j)` of `X` lives at index `i * p + j`.

mod chart;

pub use chart::{transition, Chart, ChartId, POLE_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::vector::{add, complete_orthonormal, norm, orthonormalize_against, sub, unit};
use crate::numerics::{svd, Matrix};
use crate::sampling::{gaussian_vec, rng_for, streams, Rng};

/// Constraint residual accepted for an on-manifold point.
pub const ON_MANIFOLD_TOL: f64 = 1e-10;
/// Normal component accepted for a tangent vector, relative to `1 + ‖u‖`.
pub const TANGENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldKind {
    Sphere { n: usize },
    Stiefel { n: usize, p: usize },
}

/// A manifold together with its dimensions and projection radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manifold {
    pub kind: ManifoldKind,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    /// Radius of the tube around the manifold on which the metric
    /// projection is unique and smooth.
    pub reach: f64,
}

impl Manifold {
    pub fn new(kind: ManifoldKind) -> Result<Self> {
        match kind {
            ManifoldKind::Sphere { n } => {
                if n < 2 {
                    return Err(Error::InvalidInput(format!(
                        "sphere needs ambient dimension >= 2, got {n}"
                    )));
                }
                Ok(Self {
                    kind,
                    ambient_dim: n,
                    intrinsic_dim: n - 1,
                    reach: 1.0,
                })
            }
            ManifoldKind::Stiefel { n, p } => {
                if p == 0 || p > n {
                    return Err(Error::InvalidInput(format!(
                        "Stiefel manifold needs 1 <= p <= n, got n = {n}, p = {p}"
                    )));
                }
                Ok(Self {
                    kind,
                    ambient_dim: n * p,
                    intrinsic_dim: n * p - p * (p + 1) / 2,
                    reach: 1.0,
                })
            }
        }
    }

    /// Unit sphere in `R^n`.
    pub fn sphere(n: usize) -> Self {
        Self::new(ManifoldKind::Sphere { n }).expect("sphere dimension must be >= 2")
    }

    /// Orthonormal `n x p` frames.
    pub fn stiefel(n: usize, p: usize) -> Self {
        Self::new(ManifoldKind::Stiefel { n, p }).expect("Stiefel needs 1 <= p <= n")
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, ManifoldKind::Sphere { .. })
    }

    pub fn label(&self) -> String {
        match self.kind {
            ManifoldKind::Sphere { n } => format!("S^{}", n - 1),
            ManifoldKind::Stiefel { n, p } => format!("St({n},{p})"),
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.ambient_dim {
            return Err(Error::Shape(format!(
                "{} lives in R^{}, got a vector of length {}",
                self.label(),
                self.ambient_dim,
                v.len()
            )));
        }
        Ok(())
    }

    fn as_matrix(&self, v: &[f64]) -> Matrix {
        match self.kind {
            ManifoldKind::Sphere { n } => Matrix::from_vec_unchecked(n, 1, v.to_vec()),
            ManifoldKind::Stiefel { n, p } => Matrix::from_vec_unchecked(n, p, v.to_vec()),
        }
    }

    /// `| ‖x‖ - 1 |` on the sphere, `‖XᵀX - I‖_F` on Stiefel.
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Sphere { .. } => (norm(x) - 1.0).abs(),
            ManifoldKind::Stiefel { p, .. } => {
                let xm = self.as_matrix(x);
                xm.transpose()
                    .matmul(&xm)
                    .sub(&Matrix::identity(p))
                    .frobenius_norm()
            }
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.check_len(x)?;
        let residual = self.constraint_residual(x);
        if !(residual <= ON_MANIFOLD_TOL) {
            return Err(Error::InvalidPoint { residual });
        }
        Ok(())
    }

    /// Nearest point on the manifold.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::ProjectionUndefined("non-finite input".into()));
        }
        match self.kind {
            ManifoldKind::Sphere { .. } => {
                let r = norm(y);
                if r == 0.0 {
                    return Err(Error::ProjectionUndefined("zero vector".into()));
                }
                Ok(y.iter().map(|v| v / r).collect())
            }
            ManifoldKind::Stiefel { .. } => {
                let d = svd(&self.as_matrix(y))?;
                if d.sigma_min() <= 1e-12 * d.sigma_max().max(f64::MIN_POSITIVE) {
                    return Err(Error::ProjectionUndefined(format!(
                        "rank-deficient matrix (sigma_min = {:e})",
                        d.sigma_min()
                    )));
                }
                Ok(d.u.matmul(&d.v.transpose()).into_vec())
            }
        }
    }

    /// Applies the tangent projector at `x` without validating `x`.
    fn apply_tangent_projector(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        match self.kind {
            ManifoldKind::Sphere { .. } => {
                let c: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
                z.iter().zip(x).map(|(zi, xi)| zi - c * xi).collect()
            }
            ManifoldKind::Stiefel { .. } => {
                // Z - X sym(XᵀZ)
                let xm = self.as_matrix(x);
                let zm = self.as_matrix(z);
                let xtz = xm.transpose().matmul(&zm);
                let sym = xtz.add(&xtz.transpose()).scale(0.5);
                zm.sub(&xm.matmul(&sym)).into_vec()
            }
        }
    }

    /// Orthogonal projection onto the tangent space `T_xM`.
    pub fn project_tangent(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.check_len(z)?;
        Ok(self.apply_tangent_projector(x, z))
    }

    /// The matrix of `P_{T_xM}` in ambient coordinates.
    pub fn tangent_projector(&self, x: &[f64]) -> Result<Matrix> {
        self.check_point(x)?;
        let dim = self.ambient_dim;
        match self.kind {
            ManifoldKind::Sphere { .. } => {
                Ok(Matrix::identity(dim).sub(&Matrix::outer(x, x)))
            }
            ManifoldKind::Stiefel { .. } => {
                let columns: Vec<Vec<f64>> = (0..dim)
                    .map(|k| self.apply_tangent_projector(x, &unit(dim, k)))
                    .collect();
                Ok(Matrix::from_columns(&columns))
            }
        }
    }

    /// Orthonormal basis `E` of `T_xM`, built by Gram-Schmidt on the
    /// projected coordinate vectors in index order.
    pub fn tangent_basis(&self, x: &[f64]) -> Result<TangentFrame> {
        self.check_point(x)?;
        let dim = self.ambient_dim;
        let m = self.intrinsic_dim;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        for k in 0..dim {
            if basis.len() == m {
                break;
            }
            let candidate = self.apply_tangent_projector(x, &unit(dim, k));
            if let Some(v) = orthonormalize_against(&candidate, &basis, 1e-6) {
                basis.push(v);
            }
        }
        if basis.len() < m {
            // unreachable for valid points, kept for robustness of the rank count
            complete_orthonormal(&mut basis, dim, m);
        }
        Ok(TangentFrame {
            point: x.to_vec(),
            basis: Matrix::from_columns(&basis),
        })
    }

    fn check_tangent(&self, x: &[f64], u: &[f64]) -> Result<()> {
        self.check_len(u)?;
        let normal = norm(&sub(u, &self.apply_tangent_projector(x, u)));
        if !(normal <= TANGENT_TOL * (1.0 + norm(u))) {
            return Err(Error::InvalidTangent { normal });
        }
        Ok(())
    }

    fn check_reach(&self, u: &[f64]) -> Result<()> {
        let size = norm(u);
        if !(size < self.reach) {
            return Err(Error::ReachViolation {
                norm: size,
                reach: self.reach,
            });
        }
        Ok(())
    }

    /// Projection-like retraction `R_x[u] = P_M(x + u)`.
    pub fn retract(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.check_tangent(x, u)?;
        self.check_reach(u)?;
        if u.iter().all(|&v| v == 0.0) {
            return Ok(x.to_vec());
        }
        self.project(&add(x, u))
    }

    /// Derivative of the metric projection at an ambient point `y`.
    pub fn projection_differential(&self, y: &[f64]) -> Result<Matrix> {
        self.check_len(y)?;
        match self.kind {
            ManifoldKind::Sphere { .. } => {
                let r = norm(y);
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::ProjectionUndefined("zero vector".into()));
                }
                let yhat: Vec<f64> = y.iter().map(|v| v / r).collect();
                Ok(Matrix::identity(self.ambient_dim)
                    .sub(&Matrix::outer(&yhat, &yhat))
                    .scale(1.0 / r))
            }
            ManifoldKind::Stiefel { .. } => self.polar_differential(y),
        }
    }

    /// Derivative of the polar factor `Q = U Vᵀ` of `Y = U Σ Vᵀ`:
    /// `dQ = Q Ω + (I - Q Qᵀ) dY H⁻¹` with `H = V Σ Vᵀ` and `Ω` the skew
    /// solution of `Ω H + H Ω = Qᵀ dY - dYᵀ Q`.
    fn polar_differential(&self, y: &[f64]) -> Result<Matrix> {
        let ym = self.as_matrix(y);
        let (n, p) = (ym.rows(), ym.cols());
        let d = svd(&ym)?;
        if d.sigma_min() <= 1e-12 * d.sigma_max().max(f64::MIN_POSITIVE) {
            return Err(Error::ProjectionUndefined(format!(
                "rank-deficient matrix (sigma_min = {:e})",
                d.sigma_min()
            )));
        }
        let q = d.u.matmul(&d.v.transpose());
        let vt = d.v.transpose();
        let inv_sigma: Vec<f64> = d.values.iter().map(|s| 1.0 / s).collect();
        let h_inv = d.v.matmul(&Matrix::from_diag(&inv_sigma)).matmul(&vt);
        let normal = Matrix::identity(n).sub(&q.matmul(&q.transpose()));

        let dim = n * p;
        let mut columns = Vec::with_capacity(dim);
        for k in 0..dim {
            let dy = Matrix::from_vec_unchecked(n, p, unit(dim, k));
            let qt_dy = q.transpose().matmul(&dy);
            let k_mat = qt_dy.sub(&qt_dy.transpose());
            let mut omega = vt.matmul(&k_mat).matmul(&d.v);
            for i in 0..p {
                for j in 0..p {
                    omega[(i, j)] /= d.values[i] + d.values[j];
                }
            }
            let omega = d.v.matmul(&omega).matmul(&vt);
            let dq = q.matmul(&omega).add(&normal.matmul(&dy).matmul(&h_inv));
            columns.push(dq.into_vec());
        }
        Ok(Matrix::from_columns(&columns))
    }

    /// `D_u R_x[u]`, the differential of `u ↦ P_M(x + u)`.
    pub fn retraction_differential(&self, x: &[f64], u: &[f64]) -> Result<Matrix> {
        self.check_point(x)?;
        self.check_len(u)?;
        self.check_reach(u)?;
        self.projection_differential(&add(x, u))
    }

    /// Rotation-invariant random point: a normalized Gaussian vector on the
    /// sphere, the polar factor of a Gaussian matrix on Stiefel.
    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        loop {
            let g = gaussian_vec(rng, self.ambient_dim);
            if let Ok(x) = self.project(&g) {
                return x;
            }
        }
    }

    /// `sample_uniform` on the generic stream of `seed`.
    pub fn sample_seeded(&self, seed: u64) -> Vec<f64> {
        self.sample_uniform(&mut rng_for(seed, streams::GENERIC))
    }

    /// Random unit-norm tangent vector at `x`.
    pub fn sample_tangent_direction(&self, x: &[f64], rng: &mut Rng) -> Vec<f64> {
        loop {
            let g = gaussian_vec(rng, self.ambient_dim);
            let t = self.apply_tangent_projector(x, &g);
            let size = norm(&t);
            if size > 1e-8 {
                return t.iter().map(|v| v / size).collect();
            }
        }
    }
}

/// A base point together with an orthonormal basis of its tangent space,
/// stored as the columns of an `ambient_dim x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub point: Vec<f64>,
    pub basis: Matrix,
}

impl TangentFrame {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// Ambient vector `E s` for tangent coordinates `s`.
    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        self.basis.mul_vec(coords)
    }
}
