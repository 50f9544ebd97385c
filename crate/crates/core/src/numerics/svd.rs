//! One-sided (Hestenes) Jacobi singular value decomposition.

use super::eigen::descending_order;
use super::matrix::Matrix;
use super::vector::{complete_orthonormal, dot, norm};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U diag(values) Vᵀ` with `k = min(rows, cols)` columns in
/// `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub values: Vec<f64>,
    pub u: Matrix,
    pub v: Matrix,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.values.iter().enumerate() {
            for i in 0..us.rows() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.v.transpose())
    }
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose())?;
        return Ok(Svd {
            values: t.values,
            u: t.v,
            v: t.u,
        });
    }
    svd_tall(m)
}

pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.values)
}

/// Spectral norm `σ_1`.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.sigma_max())
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn sigma_min(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.sigma_min())
}

fn svd_tall(m: &Matrix) -> Result<Svd> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut w: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    // a stricter orthogonality test can leave one pair flipping sign at
    // roundoff level indefinitely
    let tol = (rows as f64).sqrt() * f64::EPSILON;
    let mut converged = cols <= 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "one-sided Jacobi SVD",
            sweeps: MAX_SWEEPS,
        });
    }

    let sigmas: Vec<f64> = w.iter().map(|c| norm(c)).collect();
    let order = descending_order(&sigmas);
    let sigma_max = sigmas.iter().fold(0.0_f64, |a, &b| a.max(b));
    let tiny = sigma_max * f64::EPSILON * rows.max(cols) as f64;

    let mut values = Vec::with_capacity(cols);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    // descending order, so the numerically zero values come last
    for &j in &order {
        let s = sigmas[j];
        values.push(s);
        v_cols.push(v[j].clone());
        if s > tiny && s > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / s).collect());
        }
    }
    // left vectors for numerically zero singular values are arbitrary
    // orthonormal completions
    complete_orthonormal(&mut u_cols, rows, cols);

    Ok(Svd {
        values,
        u: Matrix::from_columns(&u_cols),
        v: Matrix::from_columns(&v_cols),
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}
