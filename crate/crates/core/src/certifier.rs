//! Step-size certificates for the immersion property of the iteration map.
//!
//! The constants `G = max ‖grad f‖`, `H = max ‖Dgradf · E‖` and the
//! retraction smoothness `L` are estimated by seeded sampling; the bound
//! `ᾱ = min(1/(2H), 1/(3LG), r/G)` is then checked pointwise through the chain
//!
//! ```text
//! σ_min(D_uR_x[0] V_D) ≥ 1/2,   ‖V_D‖ ≤ 3/2,
//! σ_min(D_uR_x[u] V_D) ≥ 1/2 − (3/2) L G α > 0,
//! ```
//!
//! with `V_D = (I − α Dgradf(x)) E` and `u = −α grad f(x)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::Manifold;
use crate::numerics::vector::{norm, scale};
use crate::numerics::{sigma_min, spectral_norm, Matrix};
use crate::objectives::Objective;
use crate::sampling::{rng_for, streams};

pub const DEFAULT_SAFETY: f64 = 1.2;
/// Slack allowed on the intermediate chain inequalities.
pub const CHAIN_SLACK: f64 = 1e-9;
/// Smallest singular value treated as a genuine rank drop.
pub const RANK_TOL: f64 = 1e-12;
/// Probe radii for `L`, as fractions of the reach.
pub const L_PROBE_RADII: [f64; 4] = [0.9, 0.3, 0.1, 0.03];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimates {
    /// Gradient-norm bound used by the step bound.
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub r: f64,
    pub sample_count: usize,
    pub safety_factor: f64,
    /// `safety_factor` times the sampled maximum of `‖grad f‖`.
    pub g_sampled: f64,
    /// Exact maximum of `‖grad f‖`, where one is known.
    pub g_closed_form: Option<f64>,
}

/// Samples `n_samples` points; sample `i` draws from stream `i` of `seed`, so
/// a larger sample set always contains a smaller one.
pub fn estimate_constants(
    m: &Manifold,
    obj: &Objective,
    n_samples: usize,
    safety_factor: f64,
    seed: u64,
) -> Result<ConstantEstimates> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    if !(safety_factor >= 1.0 && safety_factor.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "safety_factor must be finite and >= 1, got {safety_factor}"
        )));
    }
    check_compatible(m, obj)?;

    let per_sample: Vec<[f64; 3]> = (0..n_samples)
        .into_par_iter()
        .map(|i| sample_constants(m, obj, seed, i as u64))
        .collect::<Result<_>>()?;
    let mut max = [0.0_f64; 3];
    for s in &per_sample {
        for (acc, v) in max.iter_mut().zip(s) {
            *acc = acc.max(*v);
        }
    }

    let g_sampled = safety_factor * max[0];
    let g_closed_form = obj.closed_form_grad_bound(m);
    Ok(ConstantEstimates {
        g: g_closed_form.map_or(g_sampled, |c| c.max(g_sampled)),
        h: safety_factor * max[1],
        l: safety_factor * max[2],
        r: m.reach,
        sample_count: n_samples,
        safety_factor,
        g_sampled,
        g_closed_form,
    })
}

fn sample_constants(m: &Manifold, obj: &Objective, seed: u64, i: u64) -> Result<[f64; 3]> {
    let mut rng = rng_for(seed, streams::CONSTANTS + i);
    let x = m.sample_uniform(&mut rng);
    let grad = norm(&obj.riemannian_grad(m, &x)?);
    let frame = m.tangent_basis(&x)?;
    let hess = spectral_norm(&obj.dgradf(m, &x)?.matmul(&frame.basis))?;

    let at_zero = m.tangent_projector(&x)?;
    let mut smooth = 0.0_f64;
    for frac in L_PROBE_RADII {
        let dir = m.sample_tangent_direction(&x, &mut rng);
        let radius = frac * m.reach;
        let u = scale(&dir, radius);
        let diff = m.retraction_differential(&x, &u)?.sub(&at_zero);
        smooth = smooth.max(spectral_norm(&diff)? / radius);
    }
    Ok([grad, hess, smooth])
}

fn check_compatible(m: &Manifold, obj: &Objective) -> Result<()> {
    if obj.dim() != m.ambient_dim {
        return Err(Error::Shape(format!(
            "objective acts on R^{} but {} lives in R^{}",
            obj.dim(),
            m.label(),
            m.ambient_dim
        )));
    }
    Ok(())
}

/// Individual terms of the step bound; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub hessian: Option<f64>,
    pub smoothness: Option<f64>,
    pub reach: Option<f64>,
}

impl BoundTerms {
    pub fn min(&self) -> f64 {
        [self.hessian, self.smoothness, self.reach]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn bound_terms(c: &ConstantEstimates) -> Result<BoundTerms> {
    for (name, v) in [("G", c.g), ("H", c.h), ("L", c.l), ("r", c.r)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidConstants(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }
    let inv = |num: f64, den: f64| (den > 0.0).then(|| num / den);
    Ok(BoundTerms {
        hessian: inv(1.0, 2.0 * c.h),
        smoothness: inv(1.0, 3.0 * c.l * c.g),
        reach: inv(c.r, c.g),
    })
}

/// `ᾱ = min(1/(2H), 1/(3LG), r/G)`, infinite only when `G = H = 0`.
pub fn step_bound(c: &ConstantEstimates) -> Result<f64> {
    Ok(bound_terms(c)?.min())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `‖α grad f(x)‖ ≥ r`, so `D_uR_x[u]` is not covered by the bound.
    ReachViolation,
    /// `D_uR_x[u] V_D` lost rank: the map is not an immersion at the sample.
    RankDeficient,
    /// Full rank, but some inequality of the chain failed.
    BoundChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub x: Vec<f64>,
    /// `σ_min(D_uR_x[u] V_D)`; absent on a reach violation.
    pub sigma_min: Option<f64>,
    pub rzero_margin: f64,
    pub vd_norm: f64,
    pub final_margin: Option<f64>,
    pub chain_holds: bool,
    pub violation: Option<ViolationKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Violated { sample: usize, kind: ViolationKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub constants: ConstantEstimates,
    #[serde(with = "crate::serde_ext::unbounded")]
    pub alpha_bar: f64,
    pub alpha: f64,
    pub per_sample: Vec<SampleCheck>,
    pub verdict: Verdict,
}

impl CertificateReport {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Checks the inequality chain at `n_samples` fresh points (stream `VERIFY`).
pub fn verify_immersion(
    m: &Manifold,
    obj: &Objective,
    alpha: f64,
    constants: &ConstantEstimates,
    n_samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step size must be non-negative and finite, got {alpha}"
        )));
    }
    check_compatible(m, obj)?;
    let alpha_bar = step_bound(constants)?;
    let lower = 0.5 - 1.5 * constants.l * constants.g * alpha;

    let per_sample: Vec<SampleCheck> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, streams::VERIFY + i as u64);
            check_sample(m, obj, alpha, lower, m.sample_uniform(&mut rng))
        })
        .collect::<Result<_>>()?;

    let verdict = per_sample
        .iter()
        .enumerate()
        .find_map(|(sample, s)| s.violation.map(|kind| Verdict::Violated { sample, kind }))
        .unwrap_or(Verdict::Certified);
    Ok(CertificateReport {
        constants: constants.clone(),
        alpha_bar,
        alpha,
        per_sample,
        verdict,
    })
}

/// Evaluates the chain at one point. `lower` is `1/2 − (3/2) L G α`.
pub fn check_sample(
    m: &Manifold,
    obj: &Objective,
    alpha: f64,
    lower: f64,
    x: Vec<f64>,
) -> Result<SampleCheck> {
    let frame = m.tangent_basis(&x)?;
    let damped = Matrix::identity(m.ambient_dim).sub(&obj.dgradf(m, &x)?.scale(alpha));
    let vd = damped.matmul(&frame.basis);
    let rzero_margin = sigma_min(&m.tangent_projector(&x)?.matmul(&vd))? - 0.5;
    let vd_norm = spectral_norm(&vd)?;
    let chain_holds =
        rzero_margin >= -CHAIN_SLACK && vd_norm <= 1.5 + CHAIN_SLACK && lower > 0.0;

    let u = scale(&obj.riemannian_grad(m, &x)?, -alpha);
    if !(norm(&u) < m.reach) {
        return Ok(SampleCheck {
            x,
            sigma_min: None,
            rzero_margin,
            vd_norm,
            final_margin: None,
            chain_holds,
            violation: Some(ViolationKind::ReachViolation),
        });
    }
    let s = sigma_min(&m.retraction_differential(&x, &u)?.matmul(&vd))?;
    let final_margin = s - lower;
    let violation = if s <= RANK_TOL {
        Some(ViolationKind::RankDeficient)
    } else if !(chain_holds && final_margin > 0.0) {
        Some(ViolationKind::BoundChain)
    } else {
        None
    };
    Ok(SampleCheck {
        x,
        sigma_min: Some(s),
        rzero_margin,
        vd_norm,
        final_margin: Some(final_margin),
        chain_holds,
        violation,
    })
}

/// Estimates constants on stream `CONSTANTS`, then verifies `alpha` at
/// independent points. With `alpha = None` the check runs at `ᾱ / 2`.
pub fn certify(
    m: &Manifold,
    obj: &Objective,
    alpha: Option<f64>,
    n_samples: usize,
    safety_factor: f64,
    seed: u64,
) -> Result<CertificateReport> {
    let constants = estimate_constants(m, obj, n_samples, safety_factor, seed)?;
    let alpha = match alpha {
        Some(a) => a,
        None => {
            let bar = step_bound(&constants)?;
            if bar.is_finite() {
                bar / 2.0
            } else {
                return Err(Error::InvalidInput(
                    "step bound is unbounded for a constant objective; pass a step size".into(),
                ));
            }
        }
    };
    verify_immersion(m, obj, alpha, &constants, n_samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constants(g: f64, h: f64, l: f64, r: f64) -> ConstantEstimates {
        ConstantEstimates {
            g,
            h,
            l,
            r,
            sample_count: 1,
            safety_factor: 1.0,
            g_sampled: g,
            g_closed_form: None,
        }
    }

    #[test]
    fn step_bound_examples() {
        assert!((step_bound(&constants(2.0, 4.0, 3.0, 1.0)).unwrap() - 1.0 / 18.0).abs() < 1e-15);
        assert_eq!(step_bound(&constants(0.0, 5.0, 3.0, 1.0)).unwrap(), 0.1);
        assert_eq!(step_bound(&constants(0.0, 0.0, 3.0, 1.0)).unwrap(), f64::INFINITY);
        let base = bound_terms(&constants(2.0, 4.0, 3.0, 1.0)).unwrap();
        let doubled = bound_terms(&constants(2.0, 4.0, 6.0, 1.0)).unwrap();
        assert_eq!(doubled.hessian, base.hessian);
        assert_eq!(doubled.reach, base.reach);
        assert_eq!(doubled.smoothness.unwrap(), base.smoothness.unwrap() / 2.0);
    }

    #[test]
    fn step_bound_rejects_bad_constants() {
        for c in [
            constants(-1.0, 1.0, 1.0, 1.0),
            constants(1.0, f64::NAN, 1.0, 1.0),
            constants(1.0, 1.0, f64::INFINITY, 1.0),
        ] {
            assert!(matches!(step_bound(&c), Err(Error::InvalidConstants(_))));
        }
    }

    #[test]
    fn rayleigh_gradient_bound_is_spectral_gap() {
        let s2 = Manifold::sphere(3);
        let obj = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        let c = estimate_constants(&s2, &obj, 3000, 1.0, 11).unwrap();
        assert!((c.g_sampled - 2.0).abs() <= 0.04, "{}", c.g_sampled);
        assert!(c.g_sampled <= 2.0 + 1e-12);
        assert_eq!(c.g_closed_form, Some(2.0));
        // tangent-restricted ‖Dgradf‖ is at most 2 (λ_max − λ_min) = 4 on S²
        assert!(c.h <= 4.0 + 1e-9 && c.h > 3.9, "{}", c.h);
    }

    #[test]
    fn linear_gradient_bound_is_norm_of_c() {
        let s4 = Manifold::sphere(5);
        let c = vec![1.0, -2.0, 0.5, 0.0, 2.0];
        let obj = Objective::linear(c.clone()).unwrap();
        let est = estimate_constants(&s4, &obj, 3000, 1.0, 5).unwrap();
        assert!((est.g_sampled / norm(&c) - 1.0).abs() <= 0.02);
    }

    #[test]
    fn constant_objective_has_zero_g_and_h() {
        let s2 = Manifold::sphere(3);
        let obj = Objective::rayleigh_diag(&[0.0, 0.0, 0.0]);
        let c = estimate_constants(&s2, &obj, 50, DEFAULT_SAFETY, 1).unwrap();
        assert_eq!((c.g, c.h), (0.0, 0.0));
        assert!(c.l > 0.0);
        assert_eq!(step_bound(&c).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sphere_smoothness_constant_is_of_order_one() {
        // ‖(I − ŷŷᵀ)/‖y‖ − (I − xxᵀ)‖ / ‖u‖ stays below 2 for tangent u
        let c = estimate_constants(&Manifold::sphere(3), &Objective::rayleigh_diag(&[1.0, 2.0, 3.0]), 200, 1.0, 3)
            .unwrap();
        assert!(c.l > 0.5 && c.l < 2.0, "{}", c.l);
    }

    #[test]
    fn zero_step_has_unit_singular_values() {
        let s2 = Manifold::sphere(3);
        let obj = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        let c = estimate_constants(&s2, &obj, 20, DEFAULT_SAFETY, 2).unwrap();
        let report = verify_immersion(&s2, &obj, 0.0, &c, 20, 2).unwrap();
        for s in &report.per_sample {
            assert!((s.sigma_min.unwrap() - 1.0).abs() < 1e-12);
            assert!((s.rzero_margin - 0.5).abs() < 1e-12);
        }
        assert!(report.is_certified());
    }

    #[test]
    fn half_bound_is_certified() {
        let s2 = Manifold::sphere(3);
        let obj = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        let report = certify(&s2, &obj, None, 200, DEFAULT_SAFETY, 7).unwrap();
        assert!(report.is_certified());
        assert_eq!(report.alpha, report.alpha_bar / 2.0);
        assert!(report.per_sample.iter().all(|s| s.final_margin.unwrap() > 0.0));
    }

    #[test]
    fn far_above_bound_is_reported_per_sample() {
        let s2 = Manifold::sphere(3);
        let obj = Objective::rayleigh_diag(&[-40.0, 0.0, 40.0]);
        let c = estimate_constants(&s2, &obj, 100, DEFAULT_SAFETY, 4).unwrap();
        let alpha = 10.0 * step_bound(&c).unwrap();
        let report = verify_immersion(&s2, &obj, alpha, &c, 50, 4).unwrap();
        assert!(matches!(report.verdict, Verdict::Violated { .. }));
        assert!(report.per_sample.iter().any(|s| !s.chain_holds));
    }

    #[test]
    fn report_round_trips_through_json() {
        let s2 = Manifold::sphere(3);
        let obj = Objective::rayleigh_diag(&[0.0, 0.0, 0.0]);
        let c = estimate_constants(&s2, &obj, 5, 1.0, 0).unwrap();
        let report = verify_immersion(&s2, &obj, 0.1, &c, 5, 0).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"alpha_bar\":null"));
        let back: CertificateReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }
}
