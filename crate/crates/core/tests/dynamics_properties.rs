//! Derivative, descent and stability properties of the iteration map.

mod common;

use saddlecert::certifier::{estimate_constants, step_bound, DEFAULT_SAFETY};
use saddlecert::dynamics::{
    classify_fixed_point, dg_chart, dg_tangent, dg_tangent_fd, run, IterationConfig, ReachGuard,
    StabilityLabel, DEFAULT_CLASSIFIER_TOL,
};
use saddlecert::manifolds::{Chart, Manifold};
use saddlecert::numerics::{eig_general, spectral_norm};
use saddlecert::objectives::{CriticalLabel, Objective};
use saddlecert::sampling::rng_for;
use rand::Rng;

fn alpha_bar(m: &Manifold, obj: &Objective) -> f64 {
    step_bound(&estimate_constants(m, obj, 200, DEFAULT_SAFETY, 1).unwrap()).unwrap()
}

#[test]
fn decoupled_derivative_matches_finite_differences() {
    for (label, m, obj) in common::cases() {
        let bar = alpha_bar(&m, &obj);
        for i in 0..200u64 {
            let mut rng = rng_for(31, i);
            let x = m.sample_uniform(&mut rng);
            let alpha = bar * (1.0 - rng.random::<f64>());
            let d = dg_tangent(&m, &obj, &x, alpha).unwrap();
            let fd = dg_tangent_fd(&m, &obj, &x, alpha, &d.frame).unwrap();
            let scale = 1.0 + spectral_norm(&d.ambient_rep).unwrap();
            let err = spectral_norm(&fd.sub(&d.ambient_rep)).unwrap();
            assert!(err <= 1e-5 * scale, "{label} sample {i}: {err}");
        }
    }
}

#[test]
fn rayleigh_descent_is_monotone_below_the_bound() {
    for (label, m, obj) in common::cases() {
        if !matches!(obj, Objective::Rayleigh { .. }) {
            continue;
        }
        let alpha = 0.9 * alpha_bar(&m, &obj);
        let mut cfg = IterationConfig::new(alpha);
        cfg.max_iters = 400;
        for i in 0..100u64 {
            let x0 = m.sample_uniform(&mut rng_for(37, i));
            let traj = run(&m, &obj, &x0, &cfg).unwrap();
            for w in traj.values.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{label} trajectory {i}: {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn saddles_are_unstable_for_every_certified_step() {
    for (label, m, obj) in common::cases().into_iter().filter(|c| c.1.is_sphere()) {
        let Ok(points) = obj.critical_points(&m) else { continue };
        let bar = alpha_bar(&m, &obj);
        for cp in points.iter().filter(|cp| cp.label == CriticalLabel::Saddle) {
            for k in 1..=10 {
                let alpha = bar * k as f64 / 10.0;
                let r = classify_fixed_point(&m, &obj, &cp.point, alpha, DEFAULT_CLASSIFIER_TOL).unwrap();
                assert_eq!(r.label, StabilityLabel::Unstable, "{label} at alpha {alpha}");
            }
        }
    }
}

#[test]
fn same_chart_spectrum_matches_tangent_spectrum() {
    let m = Manifold::sphere(3);
    let obj = common::diag123();
    for cp in obj.critical_points(&m).unwrap() {
        for chart in [Chart::phi(3), Chart::psi(3)] {
            if !chart.contains(&cp.point) {
                continue;
            }
            let alpha = 0.1;
            let square = dg_tangent(&m, &obj, &cp.point, alpha).unwrap().square_rep.unwrap();
            let mut tangent: Vec<f64> = eig_general(&square).unwrap().iter().map(|z| z.re).collect();
            let jac = dg_chart(&m, &obj, &cp.point, alpha, &chart, &chart, ReachGuard::Enforce).unwrap().jacobian;
            let mut charted: Vec<f64> = eig_general(&jac).unwrap().iter().map(|z| z.re).collect();
            tangent.sort_by(f64::total_cmp);
            charted.sort_by(f64::total_cmp);
            for (a, b) in tangent.iter().zip(&charted) {
                assert!((a - b).abs() <= 1e-5, "{a} vs {b}");
            }
        }
    }
}
