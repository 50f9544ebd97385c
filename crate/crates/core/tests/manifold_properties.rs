//! Projection, retraction and chart properties on random inputs.

use proptest::prelude::*;
use saddlecert::manifolds::{transition, Chart, Manifold};
use saddlecert::numerics::vector::{add, distance, scale};
use saddlecert::numerics::{default_fd_step, fd_jacobian, sigma_min, Matrix};
use saddlecert::sampling::{gaussian_vec, rng_for};

fn manifolds() -> Vec<Manifold> {
    vec![Manifold::sphere(3), Manifold::sphere(5), Manifold::stiefel(4, 2), Manifold::stiefel(3, 3)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn projection_is_idempotent(which in 0usize..4, seed in any::<u64>(), spread in 0.1..10.0f64) {
        let m = manifolds()[which];
        let y = scale(&gaussian_vec(&mut rng_for(seed, 0), m.ambient_dim), spread);
        let Ok(p) = m.project(&y) else { return Ok(()); };
        let pp = m.project(&p).unwrap();
        prop_assert!(distance(&p, &pp) <= 1e-12);
        prop_assert!(m.constraint_residual(&p) <= 1e-12);
    }
}

#[test]
fn retraction_within_reach_is_well_conditioned() {
    for m in manifolds() {
        for i in 0..250u64 {
            let mut rng = rng_for(17, i);
            let x = m.sample_uniform(&mut rng);
            let dir = m.sample_tangent_direction(&x, &mut rng);
            let radius = 0.9 * m.reach * (i as f64 / 249.0);
            let u = scale(&dir, radius);
            m.retract(&x, &u).unwrap();
            let y = add(&x, &u);
            let jac = fd_jacobian(|z: &[f64]| m.project(z), &y, default_fd_step(&y)).unwrap();
            let frame = m.tangent_basis(&x).unwrap();
            let s = sigma_min(&jac.matmul(&frame.basis)).unwrap();
            assert!(s > 0.01, "{} at sample {i}: sigma_min {s}", m.label());
        }
    }
}

#[test]
fn retraction_differential_at_zero_is_tangent_projector() {
    for m in manifolds() {
        for seed in 0..50 {
            let x = m.sample_seeded(seed);
            let zero = vec![0.0; m.ambient_dim];
            let d = m.retraction_differential(&x, &zero).unwrap();
            let p = m.tangent_projector(&x).unwrap();
            assert!(d.sub(&p).max_abs() <= 1e-10, "{}", m.label());
        }
    }
}

#[test]
fn chart_transition_is_invertible_on_the_overlap() {
    let m = Manifold::sphere(3);
    let (phi, psi) = (Chart::phi(3), Chart::psi(3));
    for seed in 0..100 {
        let x = m.sample_seeded(seed);
        let q = phi.forward(&x).unwrap();
        let jac = fd_jacobian(|q: &[f64]| transition(&phi, &psi, q), &q, 1e-6 * (1.0 + q[0].abs().max(q[1].abs())))
            .unwrap();
        assert!(jac.det().abs() > 1e-8, "det {} at {x:?}", jac.det());
        // the analytic transition Jacobian of the inversion q / |q|^2 has det -1/|q|^4
        let s = q[0] * q[0] + q[1] * q[1];
        assert!((jac.det() + 1.0 / (s * s)).abs() <= 1e-5 * (1.0 + 1.0 / (s * s)));
    }
}

#[test]
fn stiefel_projection_of_scaled_frame_is_the_frame() {
    // polar factor of X·diag(2,3) is X for orthonormal X
    let m = Manifold::stiefel(4, 2);
    let x = m.sample_seeded(3);
    let scaled = Matrix::new(4, 2, x.clone()).unwrap().matmul(&Matrix::from_diag(&[2.0, 3.0]));
    let p = m.project(scaled.as_slice()).unwrap();
    assert!(distance(&p, &x) < 1e-12);
}
