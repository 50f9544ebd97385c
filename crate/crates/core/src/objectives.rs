//! Smooth test objectives with closed-form derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::{Manifold, ManifoldKind};
use crate::numerics::vector::{dot, norm, scale};
use crate::numerics::{sym_eig, Matrix};

/// Relative eigenvalue gap below which a Rayleigh critical point is
/// reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// JSON form of an objective: `{"kind":"rayleigh","matrix":[[...]]}` or
/// `{"kind":"linear","c":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Rayleigh { matrix: Vec<Vec<f64>> },
    Linear { c: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `f(x) = xᵀ A x` on the flattened ambient vector.
    Rayleigh { matrix: Matrix },
    /// `f(x) = cᵀ x`.
    Linear { c: Vec<f64> },
}

impl Objective {
    pub fn rayleigh(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape(format!(
                "Rayleigh matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let asymmetry = matrix.asymmetry();
        if asymmetry > 1e-12 * matrix.max_abs() {
            return Err(Error::SymmetryViolation { asymmetry });
        }
        Ok(Self::Rayleigh { matrix })
    }

    pub fn rayleigh_diag(diag: &[f64]) -> Self {
        Self::Rayleigh {
            matrix: Matrix::from_diag(diag),
        }
    }

    /// `tr(Xᵀ A X)` on `St(n, p)`, written as a Rayleigh quotient of
    /// `A ⊗ I_p` on the row-major flattening of `X`.
    pub fn rayleigh_trace(a: &Matrix, p: usize) -> Result<Self> {
        let n = a.rows();
        let mut big = Matrix::zeros(n * p, n * p);
        for i in 0..n {
            for k in 0..n {
                for j in 0..p {
                    big[(i * p + j, k * p + j)] = a[(i, k)];
                }
            }
        }
        Self::rayleigh(big)
    }

    pub fn linear(c: Vec<f64>) -> Result<Self> {
        if let Some(index) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if norm(&c) == 0.0 {
            return Err(Error::InvalidInput("linear objective needs c != 0".into()));
        }
        Ok(Self::Linear { c })
    }

    pub fn from_spec(spec: &ObjectiveSpec) -> Result<Self> {
        match spec {
            ObjectiveSpec::Rayleigh { matrix } => Self::rayleigh(Matrix::from_rows(matrix)?),
            ObjectiveSpec::Linear { c } => Self::linear(c.clone()),
        }
    }

    pub fn to_spec(&self) -> ObjectiveSpec {
        match self {
            Objective::Rayleigh { matrix } => ObjectiveSpec::Rayleigh {
                matrix: matrix.to_rows(),
            },
            Objective::Linear { c } => ObjectiveSpec::Linear { c: c.clone() },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Objective::Rayleigh { matrix } => matrix.rows(),
            Objective::Linear { c } => c.len(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "objective is defined on R^{}, got a point of length {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Value and Euclidean gradient.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        Ok(match self {
            Objective::Rayleigh { matrix } => {
                let ax = matrix.mul_vec(x);
                (dot(x, &ax), scale(&ax, 2.0))
            }
            Objective::Linear { c } => (dot(c, x), c.clone()),
        })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }

    /// Constant Euclidean Hessian: `2A` or zero.
    pub fn euclid_hessian(&self) -> Matrix {
        match self {
            Objective::Rayleigh { matrix } => matrix.scale(2.0),
            Objective::Linear { c } => Matrix::zeros(c.len(), c.len()),
        }
    }

    /// `P_{T_xM} ∇f(x)`.
    pub fn riemannian_grad(&self, m: &Manifold, x: &[f64]) -> Result<Vec<f64>> {
        let (_, grad) = self.eval(x)?;
        m.project_tangent(x, &grad)
    }

    /// Ambient Jacobian of the Riemannian gradient field
    /// `x ↦ P_{T_xM} ∇f(x)`, with the projector formula extended off the
    /// manifold. Along tangent directions it is intrinsic.
    pub fn dgradf(&self, m: &Manifold, x: &[f64]) -> Result<Matrix> {
        m.check_point(x)?;
        let (_, g) = self.eval(x)?;
        let hess = self.euclid_hessian();
        let dim = m.ambient_dim;
        match m.kind {
            ManifoldKind::Sphere { .. } => {
                // (I - xxᵀ) ∇²f - (xᵀ∇f) I - x ∇fᵀ
                let p = Matrix::identity(dim).sub(&Matrix::outer(x, x));
                Ok(p.matmul(&hess)
                    .sub(&Matrix::identity(dim).scale(dot(x, &g)))
                    .sub(&Matrix::outer(x, &g)))
            }
            ManifoldKind::Stiefel { n, p } => {
                // Ġ - Ξ sym(XᵀG) - X sym(ΞᵀG + XᵀĠ) for each unit direction Ξ
                let xm = Matrix::new(n, p, x.to_vec())?;
                let gm = Matrix::new(n, p, g)?;
                let xtg = xm.transpose().matmul(&gm);
                let sym_xtg = xtg.add(&xtg.transpose()).scale(0.5);
                let mut columns = Vec::with_capacity(dim);
                for k in 0..dim {
                    let mut xi = Matrix::zeros(n, p);
                    xi[(k / p, k % p)] = 1.0;
                    let gdot = Matrix::new(n, p, hess.column(k))?;
                    let inner = xi
                        .transpose()
                        .matmul(&gm)
                        .add(&xm.transpose().matmul(&gdot));
                    let sym_inner = inner.add(&inner.transpose()).scale(0.5);
                    let d = gdot
                        .sub(&xi.matmul(&sym_xtg))
                        .sub(&xm.matmul(&sym_inner));
                    columns.push(d.into_vec());
                }
                Ok(Matrix::from_columns(&columns))
            }
        }
    }

    /// Riemannian Hessian in the tangent basis `E`: `Eᵀ P Dgradf E`.
    pub fn riemannian_hessian(&self, m: &Manifold, x: &[f64]) -> Result<Matrix> {
        let e = m.tangent_basis(x)?.basis;
        let p = m.tangent_projector(x)?;
        let d = self.dgradf(m, x)?;
        Ok(e.transpose().matmul(&p).matmul(&d).matmul(&e))
    }

    /// Closed-form `max_{x ∈ M} ‖grad f(x)‖`, where known.
    pub fn closed_form_grad_bound(&self, m: &Manifold) -> Option<f64> {
        if !m.is_sphere() || self.dim() != m.ambient_dim {
            return None;
        }
        match self {
            Objective::Rayleigh { matrix } => {
                let s = sym_eig(matrix).ok()?;
                // max ‖2(A - xᵀAx I)x‖ over the sphere
                Some(s.max() - s.min())
            }
            Objective::Linear { c } => Some(norm(c)),
        }
    }

    /// Analytic critical points of a Rayleigh quotient on the sphere:
    /// `±v_i` for every eigenvector `v_i` of `A`, ordered by ascending
    /// eigenvalue.
    pub fn critical_points(&self, m: &Manifold) -> Result<Vec<CriticalPoint>> {
        let matrix = match (self, m.kind) {
            (Objective::Rayleigh { matrix }, ManifoldKind::Sphere { n }) if matrix.rows() == n => {
                matrix
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "analytic critical points are only available for Rayleigh quotients on spheres (got {} on {})",
                    self.kind_name(),
                    m.label()
                )))
            }
        };
        let spectrum = sym_eig(matrix)?;
        let vectors = spectrum.vectors.expect("sym_eig returns vectors");
        let scale = spectrum
            .values
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let n = spectrum.values.len();
        let mut out = Vec::with_capacity(2 * n);
        for i in (0..n).rev() {
            let lambda = spectrum.values[i];
            let mut hess: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| 2.0 * (spectrum.values[j] - lambda))
                .collect();
            hess.sort_by(|a, b| b.total_cmp(a));
            let degenerate = (0..n)
                .filter(|&j| j != i)
                .any(|j| (spectrum.values[j] - lambda).abs() <= DEGENERACY_TOL * scale);
            let label = if degenerate {
                CriticalLabel::Degenerate
            } else if hess.iter().all(|&h| h > 0.0) {
                CriticalLabel::Min
            } else if hess.iter().all(|&h| h < 0.0) {
                CriticalLabel::Max
            } else {
                CriticalLabel::Saddle
            };
            let v = vectors.column(i);
            for sign in [1.0, -1.0] {
                out.push(CriticalPoint {
                    point: scale_vec(&v, sign),
                    eigenvalue: lambda,
                    hessian_eigenvalues: hess.clone(),
                    label,
                });
            }
        }
        Ok(out)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Objective::Rayleigh { .. } => "rayleigh",
            Objective::Linear { .. } => "linear",
        }
    }
}

fn scale_vec(v: &[f64], s: f64) -> Vec<f64> {
    // keeps +0.0 entries from turning into -0.0 in reports
    v.iter().map(|x| if *x == 0.0 { 0.0 } else { x * s }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalLabel {
    Min,
    Saddle,
    Max,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: Vec<f64>,
    /// Eigenvalue of `A` belonging to this eigenvector.
    pub eigenvalue: f64,
    /// Riemannian Hessian spectrum `{2(λ_j - λ_i)}_{j≠i}`, descending.
    pub hessian_eigenvalues: Vec<f64>,
    pub label: CriticalLabel,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{default_fd_step, fd_jacobian};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn eval_examples() {
        let f = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        let (v, g) = f.eval(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g, vec![0.0, 4.0, 0.0]);
        let h = 0.5_f64.sqrt();
        assert!((f.value(&[h, h, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        let lin = Objective::linear(vec![0.0, 0.0, -1.0]).unwrap();
        assert_eq!(lin.eval(&[0.3, 0.1, 0.2]).unwrap().1, vec![0.0, 0.0, -1.0]);
        assert!(matches!(f.eval(&[1.0, 0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn constructor_validation() {
        let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            Objective::rayleigh(asym),
            Err(Error::SymmetryViolation { .. })
        ));
        assert!(Objective::linear(vec![0.0, 0.0]).is_err());
        assert!(Objective::linear(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn riemannian_grad_examples() {
        let s2 = Manifold::sphere(3);
        let f = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        assert_eq!(f.riemannian_grad(&s2, &[0.0, 1.0, 0.0]).unwrap(), vec![0.0; 3]);
        let h = 0.5_f64.sqrt();
        let g = f.riemannian_grad(&s2, &[h, h, 0.0]).unwrap();
        assert!(close(&g, &[-h, h, 0.0], 1e-15));
    }

    #[test]
    fn rayleigh_hessian_at_saddle() {
        let s2 = Manifold::sphere(3);
        let f = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        let hess = f.riemannian_hessian(&s2, &[0.0, 1.0, 0.0]).unwrap();
        let s = sym_eig(&hess).unwrap();
        assert!(close(&s.values, &[2.0, -2.0], 1e-14));
    }

    #[test]
    fn dgradf_matches_finite_differences_along_tangents() {
        let s2 = Manifold::sphere(3);
        let lin = Objective::linear(vec![0.0, 0.0, -1.0]).unwrap();
        let x = [0.0, 0.0, 1.0];
        let e = s2.tangent_basis(&x).unwrap();
        // differentiate along the manifold: s ↦ grad f(R_x(E s))
        let curve = |s: &[f64]| {
            let y = s2.retract(&x, &e.embed(s))?;
            lin.riemannian_grad(&s2, &y)
        };
        let fd = fd_jacobian(curve, &[0.0, 0.0], 1e-5).unwrap();
        let analytic = lin.dgradf(&s2, &x).unwrap().matmul(&e.basis);
        assert!(fd.sub(&analytic).max_abs() < 1e-5);
    }

    #[test]
    fn critical_points_of_distinct_spectrum() {
        let s2 = Manifold::sphere(3);
        let f = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        let cps = f.critical_points(&s2).unwrap();
        let labels: Vec<CriticalLabel> = cps.iter().map(|c| c.label).collect();
        use CriticalLabel::*;
        assert_eq!(labels, vec![Min, Min, Saddle, Saddle, Max, Max]);
        assert_eq!(cps[0].point, vec![1.0, 0.0, 0.0]);
        assert_eq!(cps[1].point, vec![-1.0, 0.0, 0.0]);
        assert_eq!(cps[2].hessian_eigenvalues, vec![2.0, -2.0]);
        for cp in &cps {
            assert!(norm(&f.riemannian_grad(&s2, &cp.point).unwrap()) <= 1e-10);
        }
    }

    #[test]
    fn critical_points_flag_degeneracy() {
        let s2 = Manifold::sphere(3);
        let all = Objective::rayleigh_diag(&[1.0, 1.0, 1.0]).critical_points(&s2).unwrap();
        assert!(all.iter().all(|c| c.label == CriticalLabel::Degenerate));
        let cps = Objective::rayleigh_diag(&[1.0, 1.0, 3.0]).critical_points(&s2).unwrap();
        for cp in &cps {
            if cp.eigenvalue == 1.0 {
                assert_eq!(cp.label, CriticalLabel::Degenerate);
            } else {
                assert_eq!(cp.label, CriticalLabel::Max);
            }
        }
        let zero = Objective::rayleigh_diag(&[0.0, 0.0, 0.0]).critical_points(&s2).unwrap();
        assert!(zero.iter().all(|c| c.label == CriticalLabel::Degenerate));
    }

    #[test]
    fn critical_points_unsupported_elsewhere() {
        let lin = Objective::linear(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            lin.critical_points(&Manifold::sphere(3)),
            Err(Error::Unsupported(_))
        ));
        let f = Objective::rayleigh_diag(&[1.0; 8]);
        assert!(f.critical_points(&Manifold::stiefel(4, 2)).is_err());
    }

    #[test]
    fn trace_form_matches_direct_trace() {
        let a = Matrix::from_rows(&[
            vec![2.0, 0.5, 0.0],
            vec![0.5, -1.0, 0.3],
            vec![0.0, 0.3, 4.0],
        ])
        .unwrap();
        let f = Objective::rayleigh_trace(&a, 2).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 0.2], vec![-0.3, 0.7], vec![0.5, 0.1]]).unwrap();
        let direct = x.transpose().matmul(&a).matmul(&x).trace();
        assert!((f.value(x.as_slice()).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn euclidean_gradient_matches_finite_differences() {
        let f = Objective::rayleigh_trace(&Matrix::from_diag(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let fd = fd_jacobian(|v| Ok(vec![f.value(v)?]), &x, default_fd_step(&x)).unwrap();
        let g = f.eval(&x).unwrap().1;
        for (a, b) in fd.row(0).iter().zip(&g) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }
}
