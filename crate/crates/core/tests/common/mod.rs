#![allow(dead_code)]

use saddlecert::manifolds::Manifold;
use saddlecert::numerics::Matrix;
use saddlecert::objectives::Objective;

/// Manifold/objective pairs exercised by the cross-module properties.
pub fn cases() -> Vec<(&'static str, Manifold, Objective)> {
    let st = Manifold::stiefel(4, 2);
    vec![
        ("S2 rayleigh", Manifold::sphere(3), Objective::rayleigh_diag(&[1.0, 2.0, 3.0])),
        ("S2 linear", Manifold::sphere(3), Objective::linear(vec![0.5, -1.0, 2.0]).unwrap()),
        (
            "S4 rayleigh",
            Manifold::sphere(5),
            Objective::rayleigh(
                Matrix::from_rows(&[
                    vec![2.0, 0.5, 0.0, -0.3, 0.0],
                    vec![0.5, -1.0, 0.2, 0.0, 0.1],
                    vec![0.0, 0.2, 0.5, 0.4, 0.0],
                    vec![-0.3, 0.0, 0.4, 1.5, -0.6],
                    vec![0.0, 0.1, 0.0, -0.6, -2.0],
                ])
                .unwrap(),
            )
            .unwrap(),
        ),
        ("S4 linear", Manifold::sphere(5), Objective::linear(vec![1.0, 0.0, -2.0, 0.5, 1.5]).unwrap()),
        (
            "St(4,2) rayleigh",
            st,
            Objective::rayleigh_trace(&Matrix::from_diag(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap(),
        ),
        (
            "St(4,2) linear",
            st,
            Objective::linear(vec![1.0, -0.5, 0.0, 2.0, 0.3, 0.0, -1.0, 0.7]).unwrap(),
        ),
    ]
}

pub fn diag123() -> Objective {
    Objective::rayleigh_diag(&[1.0, 2.0, 3.0])
}
