//! Eigenvalue routines: cyclic Jacobi for symmetric input and a shifted
//! complex QR iteration for the general (non-symmetric) case.

use num_complex::Complex64;

use super::matrix::Matrix;
use crate::error::{Error, Result};

const MAX_JACOBI_SWEEPS: usize = 100;

/// Eigenvalues or singular values sorted descending, optionally with the
/// matching orthonormal vectors stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<Matrix>,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

/// Indices that sort `values` descending; equal values keep index order.
pub(crate) fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Flips the sign of a vector so that its largest-magnitude entry is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut pivot = 0.0_f64;
    for &x in v.iter() {
        if x.abs() > pivot.abs() {
            pivot = x;
        }
    }
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(a: &Matrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "sym_eig needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let scale = a.max_abs();
    let asymmetry = a.asymmetry();
    if asymmetry > 1e-12 * scale {
        return Err(Error::SymmetryViolation { asymmetry });
    }

    let mut w = a.add(&a.transpose()).scale(0.5);
    let mut v = Matrix::identity(n);
    let mut converged = n <= 1;
    for sweep in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)] * w[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off == 0.0 || off <= f64::EPSILON * w.frobenius_norm() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                // negligible against both diagonal entries: drop it
                if sweep > 3
                    && apq.abs() <= f64::EPSILON * 1e-1 * app.abs()
                    && apq.abs() <= f64::EPSILON * 1e-1 * aqq.abs()
                {
                    w[(p, q)] = 0.0;
                    w[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "symmetric Jacobi eigensolver",
            sweeps: MAX_JACOBI_SWEEPS,
        });
    }

    let diag: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    let order = descending_order(&diag);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        canonical_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(Spectrum {
        values: order.iter().map(|&i| diag[i]).collect(),
        vectors: Some(vectors),
    })
}

/// Eigenvalues of a general real square matrix, sorted by modulus
/// (descending), then real part, then imaginary part.
pub fn eig_general(a: &Matrix) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let hess = hessenberg(a);
    let mut h: Vec<Complex64> = hess
        .as_slice()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    let at = |i: usize, j: usize| i * n + j;

    let mut eigenvalues = vec![Complex64::new(0.0, 0.0); n];
    let mut hi = n;
    let mut iterations = 0usize;
    let mut since_deflation = 0usize;
    let cap = 100 * n.max(1);
    while hi > 0 {
        let last = hi - 1;
        if last == 0 {
            eigenvalues[0] = h[at(0, 0)];
            break;
        }
        // locate the start of the unreduced block ending at `last`
        let mut lo = last;
        while lo > 0 {
            let sub = h[at(lo, lo - 1)].norm();
            let diag = h[at(lo, lo)].norm() + h[at(lo - 1, lo - 1)].norm();
            if sub <= f64::EPSILON * diag || sub < f64::MIN_POSITIVE {
                h[at(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == last {
            eigenvalues[last] = h[at(last, last)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        iterations += 1;
        since_deflation += 1;
        if iterations > cap {
            return Err(Error::NoConvergence {
                routine: "shifted QR eigenvalue iteration",
                sweeps: cap,
            });
        }

        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[at(last, last)] + Complex64::new(h[at(last, last - 1)].norm() * 0.75, 0.0)
        } else {
            wilkinson_shift(
                h[at(last - 1, last - 1)],
                h[at(last - 1, last)],
                h[at(last, last - 1)],
                h[at(last, last)],
            )
        };
        for k in lo..=last {
            h[at(k, k)] -= shift;
        }
        let mut rotations = Vec::with_capacity(last - lo);
        for k in lo..last {
            let a = h[at(k, k)];
            let b = h[at(k + 1, k)];
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if r == 0.0 {
                rotations.push((Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
                continue;
            }
            let c = a / r;
            let s = b / r;
            for j in k..=last {
                let x = h[at(k, j)];
                let y = h[at(k + 1, j)];
                h[at(k, j)] = c.conj() * x + s.conj() * y;
                h[at(k + 1, j)] = -s * x + c * y;
            }
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + offset;
            for i in lo..=(k + 1).min(last) {
                let x = h[at(i, k)];
                let y = h[at(i, k + 1)];
                h[at(i, k)] = x * c + y * s;
                h[at(i, k + 1)] = -(x * s.conj()) + y * c.conj();
            }
        }
        for k in lo..=last {
            h[at(k, k)] += shift;
        }
    }

    // clean conjugate-pair noise on real input
    for z in eigenvalues.iter_mut() {
        if z.im.abs() <= 1e-14 * (1.0 + z.re.abs()) {
            z.im = 0.0;
        }
    }
    eigenvalues.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    Ok(eigenvalues)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * (a - d) * 0.25 + b * c).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let mut v = x;
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H <- (I - 2vvᵀ/vᵀv) H (I - 2vvᵀ/vᵀv) on the trailing block
        for j in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(t, vt)| vt * h[(k + 1 + t, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vt) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= f * vt;
            }
        }
        for i in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(t, vt)| vt * h[(i, k + 1 + t)]).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vt) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= f * vt;
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = 0.0;
        }
    }
    h
}
