//! Slice helpers for ambient vectors.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn unit(dim: usize, axis: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[axis] = 1.0;
    e
}

/// Extends `basis` (assumed orthonormal) to `target` orthonormal vectors in
/// `R^dim` by Gram-Schmidt against the coordinate vectors, in index order.
pub fn complete_orthonormal(basis: &mut Vec<Vec<f64>>, dim: usize, target: usize) {
    let mut axis = 0;
    while basis.len() < target && axis < dim {
        let candidate = unit(dim, axis);
        axis += 1;
        if let Some(v) = orthonormalize_against(&candidate, basis, 1e-8) {
            basis.push(v);
        }
    }
}

/// Removes the components of `v` along `basis` (twice, for stability) and
/// normalizes. Returns `None` if less than `drop_tol` of the norm survives.
pub fn orthonormalize_against(v: &[f64], basis: &[Vec<f64>], drop_tol: f64) -> Option<Vec<f64>> {
    let original = norm(v);
    if original == 0.0 {
        return None;
    }
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let remaining = norm(&w);
    if remaining <= drop_tol * original {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= remaining);
    Some(w)
}
