//! The iteration map `g(x) = P_M(x - α P_{T_xM} ∇f(x))`, trajectories,
//! three routes to its derivative, and fixed-point classification.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::{Chart, Manifold, TangentFrame};
use crate::numerics::vector::{add, distance, norm, scale};
use crate::numerics::{eig_general, fd_jacobian_with_steps, Matrix};
use crate::objectives::Objective;

/// Gradient norm at or below which a point counts as a fixed point of `g`.
pub const FIXED_POINT_TOL: f64 = 1e-8;
pub const DEFAULT_CLASSIFIER_TOL: f64 = 1e-6;
pub const DEFAULT_GRAD_TOL: f64 = 1e-10;
pub const DEFAULT_MOVE_TOL: f64 = 1e-14;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// How `step` treats steps whose length reaches the projection radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReachGuard {
    /// Reject `α ‖grad f(x)‖ ≥ r` with [`Error::StepTooLong`].
    #[default]
    Enforce,
    /// Only require the metric projection to be defined at `x + u`.
    ProjectionDomainOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    pub step_size: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_move_tol")]
    pub move_tol: f64,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

fn default_grad_tol() -> f64 {
    DEFAULT_GRAD_TOL
}

fn default_move_tol() -> f64 {
    DEFAULT_MOVE_TOL
}

impl IterationConfig {
    pub fn new(step_size: f64) -> Self {
        Self {
            step_size,
            max_iters: DEFAULT_MAX_ITERS,
            grad_tol: DEFAULT_GRAD_TOL,
            move_tol: DEFAULT_MOVE_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if !(self.move_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "move_tol must be positive, got {}",
                self.move_tol
            )));
        }
        Ok(())
    }
}

/// One iteration `g(x)` with the reach check enforced.
pub fn step(m: &Manifold, obj: &Objective, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    step_with_guard(m, obj, x, alpha, ReachGuard::Enforce)
}

pub fn step_with_guard(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    alpha: f64,
    guard: ReachGuard,
) -> Result<Vec<f64>> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step size must be non-negative and finite, got {alpha}"
        )));
    }
    let grad = obj.riemannian_grad(m, x)?;
    let u = scale(&grad, -alpha);
    let size = norm(&u);
    if guard == ReachGuard::Enforce && !(size < m.reach) {
        return Err(Error::StepTooLong {
            norm: size,
            reach: m.reach,
        });
    }
    if u.iter().all(|&v| v == 0.0) {
        return Ok(x.to_vec());
    }
    m.project(&add(x, &u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Vec<f64>>,
    pub grad_norms: Vec<f64>,
    pub values: Vec<f64>,
    pub terminus: Vec<f64>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// One row per iterate: `index, x_0, ..., x_{N-1}, grad_norm, f`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dim = self.points.first().map_or(0, Vec::len);
        let mut header = vec!["index".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.push("grad_norm".into());
        header.push("f".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, point) in self.points.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(point.iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", self.grad_norms[k]));
            row.push(format!("{:e}", self.values[k]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Iterates `g` from `x0` until the gradient norm drops to `grad_tol`, a
/// step moves less than `move_tol`, or `max_iters` steps were taken.
pub fn run(m: &Manifold, obj: &Objective, x0: &[f64], cfg: &IterationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    m.check_point(x0)?;
    let mut points = vec![x0.to_vec()];
    let mut grad_norms = Vec::new();
    let mut values = Vec::new();

    let mut x = x0.to_vec();
    let status = loop {
        let k = points.len() - 1;
        let (value, _) = obj.eval(&x)?;
        let gnorm = norm(&obj.riemannian_grad(m, &x)?);
        grad_norms.push(gnorm);
        values.push(value);
        if !gnorm.is_finite() || !value.is_finite() {
            break TrajectoryStatus::Diverged;
        }
        if gnorm <= cfg.grad_tol {
            break TrajectoryStatus::Converged;
        }
        if k >= cfg.max_iters {
            break TrajectoryStatus::MaxIters;
        }
        let next = step(m, obj, &x, cfg.step_size).map_err(|e| Error::IterationFailed {
            iteration: k,
            source: Box::new(e),
        })?;
        let moved = distance(&next, &x);
        points.push(next.clone());
        x = next;
        if moved <= cfg.move_tol {
            let (value, _) = obj.eval(&x)?;
            grad_norms.push(norm(&obj.riemannian_grad(m, &x)?));
            values.push(value);
            break TrajectoryStatus::Converged;
        }
    };
    Ok(Trajectory {
        terminus: x,
        points,
        grad_norms,
        values,
        status,
    })
}

/// `Dg(x)` restricted to `T_xM`.
#[derive(Debug, Clone, PartialEq)]
pub struct DgTangent {
    pub frame: TangentFrame,
    /// `D_u R_x[u] (I - α Dgradf(x)) E` with `u = -α grad f(x)`.
    pub ambient_rep: Matrix,
    /// `Eᵀ ambient_rep`, present when `x` is a fixed point of `g`.
    pub square_rep: Option<Matrix>,
}

/// Tangent derivative of `g` via the decoupled form
/// `Dg(x)[ξ] = D_u R_x[u] (I - α Dgradf(x))[ξ]`.
pub fn dg_tangent(m: &Manifold, obj: &Objective, x: &[f64], alpha: f64) -> Result<DgTangent> {
    dg_tangent_with_guard(m, obj, x, alpha, ReachGuard::Enforce)
}

pub fn dg_tangent_with_guard(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    alpha: f64,
    guard: ReachGuard,
) -> Result<DgTangent> {
    let frame = m.tangent_basis(x)?;
    let grad = obj.riemannian_grad(m, x)?;
    let u = scale(&grad, -alpha);
    let retraction = match guard {
        ReachGuard::Enforce => m
            .retraction_differential(x, &u)
            .map_err(|e| match e {
                Error::ReachViolation { norm, reach } => Error::StepTooLong { norm, reach },
                other => other,
            })?,
        ReachGuard::ProjectionDomainOnly => m.projection_differential(&add(x, &u))?,
    };
    let dgrad = obj.dgradf(m, x)?;
    let inner = Matrix::identity(m.ambient_dim).sub(&dgrad.scale(alpha));
    let ambient_rep = retraction.matmul(&inner).matmul(&frame.basis);
    let square_rep = (norm(&grad) <= FIXED_POINT_TOL)
        .then(|| frame.basis.transpose().matmul(&ambient_rep));
    Ok(DgTangent {
        frame,
        ambient_rep,
        square_rep,
    })
}

/// Finite-difference oracle for `Dg(x) E`: differentiates
/// `s ↦ g(R_x(E s))` at `s = 0`, a curve through `x` with velocity `E`.
pub fn dg_tangent_fd(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    alpha: f64,
    frame: &TangentFrame,
) -> Result<Matrix> {
    let origin = vec![0.0; frame.dim()];
    let h = crate::numerics::default_fd_step(&origin);
    let map = |s: &[f64]| {
        let y = m.retract(x, &frame.embed(s))?;
        step_with_guard(m, obj, &y, alpha, ReachGuard::ProjectionDomainOnly)
    };
    fd_jacobian_with_steps(map, &origin, &vec![h; frame.dim()])
}

/// Chart representation of `Dg` at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DgChart {
    /// Jacobian of `chart_out ∘ g ∘ chart_in⁻¹` at `chart_in(x)`.
    pub jacobian: Matrix,
    /// Its determinant, `h_x(α)`.
    pub h: f64,
}

fn require_sphere_chart(m: &Manifold, chart: &Chart) -> Result<()> {
    if !m.is_sphere() || chart.n != m.ambient_dim {
        return Err(Error::Unsupported(format!(
            "stereographic charts on S^{} do not apply to {}",
            chart.n.saturating_sub(1),
            m.label()
        )));
    }
    Ok(())
}

/// Finite-difference Jacobian of `chart_out ∘ g ∘ chart_in⁻¹` in chart
/// coordinates, step `1e-6 (1 + |q_i|)` per coordinate.
pub fn dg_chart(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    alpha: f64,
    chart_in: &Chart,
    chart_out: &Chart,
    guard: ReachGuard,
) -> Result<DgChart> {
    require_sphere_chart(m, chart_in)?;
    require_sphere_chart(m, chart_out)?;
    let q = chart_in.forward(x)?;
    let gx = step_with_guard(m, obj, x, alpha, guard)?;
    chart_out.forward(&gx)?;
    let steps: Vec<f64> = q.iter().map(|v| 1e-6 * (1.0 + v.abs())).collect();
    let map = |coords: &[f64]| {
        let p = chart_in.inverse(coords)?;
        chart_out.forward(&step_with_guard(m, obj, &p, alpha, guard)?)
    };
    let jacobian = fd_jacobian_with_steps(map, &q, &steps)?;
    let h = jacobian.det();
    Ok(DgChart { jacobian, h })
}

/// Chain-rule form `J(chart_out)|_{g(x)} · Dg(x) · J(chart_in⁻¹)|_{chart_in(x)}`,
/// used to cross-check [`dg_chart`].
pub fn dg_chart_analytic(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    alpha: f64,
    chart_in: &Chart,
    chart_out: &Chart,
    guard: ReachGuard,
) -> Result<DgChart> {
    require_sphere_chart(m, chart_in)?;
    require_sphere_chart(m, chart_out)?;
    let q = chart_in.forward(x)?;
    let gx = step_with_guard(m, obj, x, alpha, guard)?;
    let grad = obj.riemannian_grad(m, x)?;
    let u = scale(&grad, -alpha);
    let retraction = m.projection_differential(&add(x, &u))?;
    let inner = Matrix::identity(m.ambient_dim).sub(&obj.dgradf(m, x)?.scale(alpha));
    let jacobian = chart_out
        .jacobian_forward(&gx)?
        .matmul(&retraction)
        .matmul(&inner)
        .matmul(&chart_in.jacobian_inverse(&q)?);
    let h = jacobian.det();
    Ok(DgChart { jacobian, h })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityLabel {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(z: Complex64) -> Self {
        Self {
            re: z.re,
            im: z.im,
            modulus: z.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub fixed_point: Vec<f64>,
    /// Eigenvalues of the tangent self-map `Eᵀ Dg E`, by descending modulus.
    pub spectrum: Vec<Eigenvalue>,
    pub label: StabilityLabel,
}

/// `unstable` iff the spectral radius exceeds `1 + tol`, `marginal` within
/// `[1 - tol, 1 + tol]`, `stable` below.
pub fn stability_label(spectral_radius: f64, tol: f64) -> StabilityLabel {
    if spectral_radius > 1.0 + tol {
        StabilityLabel::Unstable
    } else if spectral_radius >= 1.0 - tol {
        StabilityLabel::Marginal
    } else {
        StabilityLabel::Stable
    }
}

pub fn classify_fixed_point(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    alpha: f64,
    classifier_tol: f64,
) -> Result<StabilityReport> {
    let grad_norm = norm(&obj.riemannian_grad(m, x)?);
    if !(grad_norm <= FIXED_POINT_TOL) {
        return Err(Error::NotFixedPoint { grad_norm });
    }
    let dg = dg_tangent(m, obj, x, alpha)?;
    let square = dg
        .square_rep
        .expect("fixed point always carries the square representation");
    let spectrum: Vec<Eigenvalue> = eig_general(&square)?
        .into_iter()
        .map(Eigenvalue::from)
        .collect();
    let radius = spectrum.first().map_or(0.0, |e| e.modulus);
    Ok(StabilityReport {
        fixed_point: x.to_vec(),
        spectrum,
        label: stability_label(radius, classifier_tol),
    })
}
