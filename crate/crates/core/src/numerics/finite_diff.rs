//! Central-difference Jacobians, used as independent oracles for the
//! analytic derivatives elsewhere in the crate.

use super::matrix::Matrix;
use super::vector::norm;
use crate::error::{Error, Result};

/// Default central-difference step: `ε^(1/3) (1 + ‖x‖)`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + norm(x))
}

/// Central-difference Jacobian of `map` at `x` with a uniform step.
pub fn fd_jacobian<F>(map: F, x: &[f64], step: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fd_jacobian_with_steps(map, x, &vec![step; x.len()])
}

/// Central-difference Jacobian with one step per input coordinate.
pub fn fd_jacobian_with_steps<F>(map: F, x: &[f64], steps: &[f64]) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if steps.len() != x.len() {
        return Err(Error::Shape(format!(
            "{} steps for a {}-dimensional point",
            steps.len(),
            x.len()
        )));
    }
    if let Some(bad) = steps.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {bad}"
        )));
    }
    let mut columns = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for (j, &h) in steps.iter().enumerate() {
        probe[j] = x[j] + h;
        let plus = map(&probe)?;
        probe[j] = x[j] - h;
        let minus = map(&probe)?;
        probe[j] = x[j];
        if plus.len() != minus.len() {
            return Err(Error::Shape("map output length changed between probes".into()));
        }
        // use the realized step to cancel representation error in x ± h
        let width = (x[j] + h) - (x[j] - h);
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / width)
                .collect::<Vec<f64>>(),
        );
    }
    if columns.is_empty() {
        let rows = map(x)?.len();
        return Ok(Matrix::zeros(rows, 0));
    }
    Ok(Matrix::from_columns(&columns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_linear_maps() {
        let b = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![3.0, 0.0, 4.0]]).unwrap();
        let x = [0.3, -1.2, 2.5];
        let j = fd_jacobian(|v| Ok(b.mul_vec(v)), &x, default_fd_step(&x)).unwrap();
        assert!(j.sub(&b).max_abs() < 1e-9);
    }

    #[test]
    fn quadratic_map_at_one_one() {
        let map = |v: &[f64]| Ok(vec![v[0] * v[0], v[0] * v[1]]);
        let x = [1.0, 1.0];
        let j = fd_jacobian(map, &x, default_fd_step(&x)).unwrap();
        let want = Matrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(j.sub(&want).max_abs() < 1e-9);
    }

    #[test]
    fn normalization_map_at_radius_two() {
        let x = [0.0, 1.2, -1.6];
        let xhat: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
        let map = |v: &[f64]| {
            let n = norm(v);
            Ok(v.iter().map(|t| t / n).collect())
        };
        let j = fd_jacobian(map, &x, default_fd_step(&x)).unwrap();
        let want = Matrix::identity(3)
            .sub(&Matrix::outer(&xhat, &xhat))
            .scale(0.5);
        assert!(j.sub(&want).max_abs() < 1e-9);
    }

    #[test]
    fn propagates_map_failures() {
        let err = fd_jacobian(
            |v: &[f64]| {
                if v[0] > 0.0 {
                    Err(Error::InvalidInput("probe rejected".into()))
                } else {
                    Ok(vec![v[0]])
                }
            },
            &[0.0],
            1e-3,
        )
        .unwrap_err();
        assert_eq!(err, Error::InvalidInput("probe rejected".into()));
        assert!(fd_jacobian(|v: &[f64]| Ok(v.to_vec()), &[0.0], 0.0).is_err());
    }

    #[test]
    fn error_is_second_order_in_step() {
        // cubic map: the truncation error of the central stencil is h² f'''/6
        let map = |v: &[f64]| Ok(vec![v[0].powi(3) + v[0] * v[1], v[1].powi(3)]);
        let x = [0.7, -0.4];
        let exact = Matrix::from_rows(&[
            vec![3.0 * 0.49 + -0.4, 0.7],
            vec![0.0, 3.0 * 0.16],
        ])
        .unwrap();
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&h| fd_jacobian(map, &x, h).unwrap().sub(&exact).max_abs())
            .collect();
        for pair in errs.windows(2) {
            let slope = (pair[0] / pair[1]).log2();
            assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
        }
    }
}
