//! Gradient consistency and critical-point facts for the test objectives.

mod common;

use saddlecert::numerics::vector::norm;
use saddlecert::numerics::{default_fd_step, fd_jacobian, Matrix};
use saddlecert::objectives::Objective;
use saddlecert::manifolds::Manifold;
use saddlecert::sampling::{gaussian_vec, rng_for};

#[test]
fn euclidean_gradient_matches_central_differences() {
    for (label, m, obj) in common::cases() {
        for i in 0..100u64 {
            // any ambient point, not only manifold points
            let x = gaussian_vec(&mut rng_for(23, i), m.ambient_dim);
            let (_, grad) = obj.eval(&x).unwrap();
            let fd = fd_jacobian(|z: &[f64]| Ok(vec![obj.value(z)?]), &x, default_fd_step(&x)).unwrap();
            let diff: f64 = fd.row(0).iter().zip(&grad).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff <= 1e-6 * norm(&grad).max(1.0), "{label}: {diff}");
        }
    }
}

#[test]
fn gradient_vanishes_at_critical_points() {
    for (label, m, obj) in common::cases().into_iter().filter(|c| c.1.is_sphere()) {
        let Ok(points) = obj.critical_points(&m) else { continue };
        assert_eq!(points.len(), 2 * m.ambient_dim, "{label}");
        for cp in points {
            assert!(norm(&obj.riemannian_grad(&m, &cp.point).unwrap()) <= 1e-10, "{label}");
        }
    }
}

#[test]
fn rayleigh_gradient_norm_is_bounded_by_spectral_gap() {
    let a = Matrix::from_rows(&[vec![3.0, 1.0, 0.0], vec![1.0, -1.0, 0.5], vec![0.0, 0.5, 2.0]]).unwrap();
    let obj = Objective::rayleigh(a).unwrap();
    let m = Manifold::sphere(3);
    let gap = obj.closed_form_grad_bound(&m).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..10_000u64 {
        let x = m.sample_uniform(&mut rng_for(29, i));
        worst = worst.max(norm(&obj.riemannian_grad(&m, &x).unwrap()));
    }
    assert!(worst <= gap + 1e-9);
    assert!(worst >= 0.95 * gap);
}
