//! The stereographic chart-switch discontinuity of `h_x(α) = det(Dg)`.
//!
//! With `f(x) = -x_n` on `S^{n-1}`, one step from `x` lands exactly on the
//! north pole at `α₀ = 1/x_n`. The chart `φ` excludes that pole, so a
//! sweep that must switch its codomain chart to `ψ` there sees `h` jump,
//! while a sweep that keeps `ψ` throughout stays smooth.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{dg_chart, step_with_guard, ReachGuard};
use crate::error::{Error, Result};
use crate::manifolds::{Chart, ChartId, Manifold, POLE_TOL};
use crate::numerics::vector::{distance, norm, unit};
use crate::objectives::Objective;

pub const DEFAULT_JUMP_FACTOR: f64 = 10.0;
/// Required distance between `g(x)` at `α₀` and the north pole.
pub const CROSSING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartPolicy {
    /// `φ` while `g(x)` avoids the north pole, `ψ` from the crossing on.
    PhiThenSwitch,
    FixedPsi,
    FixedPhi,
}

/// `s` when `obj` is `Linear(-s e_n)` with `s > 0`.
fn downhill_scale(m: &Manifold, obj: &Objective) -> Option<f64> {
    match obj {
        Objective::Linear { c } if m.is_sphere() && c.len() == m.ambient_dim => {
            let (last, rest) = c.split_last()?;
            (*last < 0.0 && rest.iter().all(|&v| v == 0.0)).then_some(-last)
        }
        _ => None,
    }
}

/// Step size at which `g(x)` reaches the north pole: `α₀ = 1/(s x_n)` for
/// `f = -s x_n`, confirmed by evaluating the step.
pub fn find_alpha0(m: &Manifold, obj: &Objective, x: &[f64]) -> Result<f64> {
    let s = downhill_scale(m, obj).ok_or_else(|| {
        Error::Unsupported("the crossing step needs Linear(-s e_n) on a sphere".into())
    })?;
    m.check_point(x)?;
    let n = m.ambient_dim;
    let north = unit(n, n - 1);
    if distance(x, &north) <= POLE_TOL {
        return Err(Error::AlreadyFixed);
    }
    let last = x[n - 1];
    if !(last > 0.0) {
        return Err(Error::NoCrossing { last });
    }
    let alpha0 = 1.0 / (s * last);
    let landed = step_with_guard(m, obj, x, alpha0, ReachGuard::ProjectionDomainOnly)?;
    let miss = distance(&landed, &north);
    if miss > CROSSING_TOL {
        return Err(Error::CrossingMismatch { distance: miss });
    }
    Ok(alpha0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub alphas: Vec<f64>,
    pub h_values: Vec<f64>,
    pub chart_out_ids: Vec<ChartId>,
    pub chart_policy: ChartPolicy,
    pub alpha0: Option<f64>,
}

impl SweepSeries {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Successive differences `h[i+1] - h[i]`.
    pub fn increments(&self) -> Vec<f64> {
        self.h_values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn max_abs_increment(&self) -> f64 {
        self.increments().iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "alpha,h,chart_out_id")?;
        for ((a, h), id) in self.alphas.iter().zip(&self.h_values).zip(&self.chart_out_ids) {
            writeln!(out, "{a:e},{h:e},{}", id.name())?;
        }
        Ok(())
    }
}

/// `n` equally spaced step sizes from `start` to `end` inclusive.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(start < end) || !start.is_finite() || !end.is_finite() {
        return Err(Error::InvalidInput(format!(
            "grid needs start < end and at least 2 points, got [{start}, {end}] x {n}"
        )));
    }
    let step = (end - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// `h_x(α)` along `alphas` with domain chart `φ` and the codomain chart
/// chosen by `policy`. The reach check is relaxed to the projection domain,
/// since the crossing step has length `r` exactly.
pub fn h_sweep(
    m: &Manifold,
    obj: &Objective,
    x: &[f64],
    alphas: &[f64],
    policy: ChartPolicy,
) -> Result<SweepSeries> {
    if !m.is_sphere() {
        return Err(Error::Unsupported(format!(
            "stereographic sweep on {}",
            m.label()
        )));
    }
    if alphas.iter().any(|a| !a.is_finite() || *a < 0.0)
        || alphas.windows(2).any(|w| !(w[0] < w[1]))
    {
        return Err(Error::InvalidInput(
            "alpha grid must be finite, non-negative and strictly increasing".into(),
        ));
    }
    let n = m.ambient_dim;
    let (phi, psi) = (Chart::phi(n), Chart::psi(n));
    phi.forward(x)?;

    let alpha0 = match downhill_scale(m, obj) {
        Some(_) => Some(find_alpha0(m, obj, x)?),
        None => None,
    };
    let guard = ReachGuard::ProjectionDomainOnly;
    let h_with = |alpha: f64, out: &Chart| dg_chart(m, obj, x, alpha, &phi, out, guard).map(|d| d.h);

    let evaluated: Vec<(f64, ChartId)> = match (policy, alpha0) {
        (ChartPolicy::PhiThenSwitch, None) => {
            // unknown crossing: keep φ until it fails, then stay on ψ
            let mut out = Vec::with_capacity(alphas.len());
            let mut switched = false;
            for &a in alphas {
                if !switched {
                    match h_with(a, &phi) {
                        Ok(h) => {
                            out.push((h, ChartId::Phi));
                            continue;
                        }
                        Err(Error::ChartDomain { .. }) => switched = true,
                        Err(e) => return Err(e),
                    }
                }
                out.push((h_with(a, &psi)?, ChartId::Psi));
            }
            out
        }
        _ => alphas
            .par_iter()
            .map(|&a| {
                let out = match policy {
                    ChartPolicy::FixedPhi => phi,
                    ChartPolicy::FixedPsi => psi,
                    ChartPolicy::PhiThenSwitch if a < alpha0.unwrap_or(f64::INFINITY) => phi,
                    ChartPolicy::PhiThenSwitch => psi,
                };
                Ok((h_with(a, &out)?, out.id))
            })
            .collect::<Result<_>>()?,
    };

    let (h_values, chart_out_ids) = evaluated.into_iter().unzip();
    Ok(SweepSeries {
        alphas: alphas.to_vec(),
        h_values,
        chart_out_ids,
        chart_policy: policy,
        alpha0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    /// Index `i` of the increment `h[i+1] - h[i]`.
    pub index: usize,
    /// Midpoint of the grid cell holding the jump.
    pub location: f64,
    pub magnitude: f64,
}

/// Every maximal run of consecutive increments with
/// `|Δh_i| > jump_factor · median_{j≠i} |Δh_j|`, reported at its largest
/// increment.
pub fn jump_events(series: &SweepSeries, jump_factor: f64) -> Result<Vec<Jump>> {
    if series.len() < 4 || series.h_values.len() != series.len() {
        return Err(Error::InvalidInput(format!(
            "jump detection needs at least 4 aligned points, got {}",
            series.len()
        )));
    }
    if !(jump_factor > 0.0) {
        return Err(Error::InvalidInput("jump_factor must be positive".into()));
    }
    let deltas: Vec<f64> = series.increments().iter().map(|d| d.abs()).collect();
    let mut sorted = deltas.clone();
    sorted.sort_by(f64::total_cmp);

    let flagged: Vec<bool> = deltas
        .iter()
        .map(|&d| d > 0.0 && d > jump_factor * median_without(&sorted, d))
        .collect();

    let mut events = Vec::new();
    let mut i = 0;
    while i < deltas.len() {
        if !flagged[i] {
            i += 1;
            continue;
        }
        let mut best = i;
        while i < deltas.len() && flagged[i] {
            if deltas[i] > deltas[best] {
                best = i;
            }
            i += 1;
        }
        events.push(Jump {
            index: best,
            location: 0.5 * (series.alphas[best] + series.alphas[best + 1]),
            magnitude: deltas[best],
        });
    }
    Ok(events)
}

/// Median of `sorted` with one copy of `skip` removed.
fn median_without(sorted: &[f64], skip: f64) -> f64 {
    let pos = sorted.partition_point(|&v| v < skip);
    let rest: Vec<f64> = sorted[..pos].iter().chain(&sorted[pos + 1..]).copied().collect();
    let k = rest.len();
    if k % 2 == 1 {
        rest[k / 2]
    } else {
        0.5 * (rest[k / 2 - 1] + rest[k / 2])
    }
}

/// The largest jump event, if any.
pub fn detect_jump(series: &SweepSeries, jump_factor: f64) -> Result<Option<Jump>> {
    Ok(jump_events(series, jump_factor)?
        .into_iter()
        .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude)))
}

/// `‖J(φ) − J(ψ)‖_F` at `x`, the gap between the two chart differentials.
pub fn chart_jacobian_gap(x: &[f64]) -> Result<f64> {
    let n = x.len();
    let gap = Chart::phi(n)
        .jacobian_forward(x)?
        .sub(&Chart::psi(n).jacobian_forward(x)?);
    Ok(norm(gap.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Manifold, Objective, Vec<f64>) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        (
            Manifold::sphere(3),
            Objective::linear(vec![0.0, 0.0, -1.0]).unwrap(),
            vec![h, 0.0, h],
        )
    }

    fn synthetic(h_values: Vec<f64>) -> SweepSeries {
        SweepSeries {
            alphas: (0..h_values.len()).map(|i| i as f64 * 0.01).collect(),
            chart_out_ids: vec![ChartId::Psi; h_values.len()],
            h_values,
            chart_policy: ChartPolicy::FixedPsi,
            alpha0: None,
        }
    }

    #[test]
    fn alpha0_closed_form() {
        let (m, obj, x) = setup();
        let a0 = find_alpha0(&m, &obj, &x).unwrap();
        assert!((a0 - 2f64.sqrt()).abs() < 1e-12);
        let half = [0.75f64.sqrt(), 0.0, 0.5];
        assert!((find_alpha0(&m, &obj, &half).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn alpha0_errors() {
        let (m, obj, _) = setup();
        assert_eq!(find_alpha0(&m, &obj, &[0.0, 0.0, 1.0]), Err(Error::AlreadyFixed));
        assert!(matches!(
            find_alpha0(&m, &obj, &[1.0, 0.0, 0.0]),
            Err(Error::NoCrossing { .. })
        ));
        let other = Objective::linear(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(find_alpha0(&m, &other, &[0.6, 0.0, 0.8]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn matched_charts_give_unit_determinant_at_zero_step() {
        let (m, obj, x) = setup();
        let s = h_sweep(&m, &obj, &x, &[0.0, 1e-3], ChartPolicy::FixedPhi).unwrap();
        assert!((s.h_values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fixed_phi_fails_at_the_crossing() {
        let (m, obj, x) = setup();
        let a0 = 2f64.sqrt();
        let r = h_sweep(&m, &obj, &x, &[0.5, a0], ChartPolicy::FixedPhi);
        assert!(matches!(r, Err(Error::ChartDomain { chart: "phi" })));
    }

    #[test]
    fn switch_policy_labels_charts() {
        let (m, obj, x) = setup();
        let grid = uniform_grid(0.1, 1.6, 41).unwrap();
        let s = h_sweep(&m, &obj, &x, &grid, ChartPolicy::PhiThenSwitch).unwrap();
        for (a, id) in s.alphas.iter().zip(&s.chart_out_ids) {
            assert_eq!(*id == ChartId::Phi, *a < 2f64.sqrt());
        }
    }

    #[test]
    fn switch_policy_without_closed_form_falls_back_on_domain_errors() {
        // a Rayleigh objective never lands on the pole, so φ is kept
        let m = Manifold::sphere(3);
        let obj = Objective::rayleigh_diag(&[1.0, 2.0, 3.0]);
        let x = m.project(&[0.3, 0.4, 0.5]).unwrap();
        let grid = uniform_grid(0.01, 0.1, 5).unwrap();
        let s = h_sweep(&m, &obj, &x, &grid, ChartPolicy::PhiThenSwitch).unwrap();
        assert!(s.alpha0.is_none());
        assert!(s.chart_out_ids.iter().all(|&id| id == ChartId::Phi));
    }

    #[test]
    fn synthetic_jump_is_flagged() {
        let mut h: Vec<f64> = (0..50).map(|i| 1e-3 * ((i * 7919 % 13) as f64 / 13.0)).collect();
        for v in h.iter_mut().skip(30) {
            *v += 0.5;
        }
        let s = synthetic(h);
        let events = jump_events(&s, DEFAULT_JUMP_FACTOR).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].index, 29);
    }

    #[test]
    fn smooth_and_constant_series_are_not_flagged() {
        let smooth = synthetic((0..=50).map(|i| 1.0 - (i as f64 * 0.01).powi(2)).collect());
        assert_eq!(detect_jump(&smooth, DEFAULT_JUMP_FACTOR).unwrap(), None);
        assert_eq!(detect_jump(&synthetic(vec![2.0; 10]), DEFAULT_JUMP_FACTOR).unwrap(), None);
        assert!(detect_jump(&synthetic(vec![1.0, 2.0, 3.0]), DEFAULT_JUMP_FACTOR).is_err());
    }

    #[test]
    fn csv_export() {
        let s = synthetic(vec![1.0, 2.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "alpha,h,chart_out_id\n0e0,1e0,psi\n1e-2,2e0,psi\n");
    }

    #[test]
    fn chart_differentials_differ_off_the_equator() {
        let x = [0.6, 0.0, 0.8];
        assert!(chart_jacobian_gap(&x).unwrap() > 1e-3);
    }
}
