//! Stereographic charts on the unit sphere `S^{n-1}`.
//!
//! `Phi` projects from the north pole `+e_n` and is undefined there;
//! `Psi` projects from the south pole `-e_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::vector::{distance, unit};
use crate::numerics::Matrix;

/// Distance to the excluded pole below which a point is outside the chart.
pub const POLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartId {
    /// `x ↦ x_{1..n-1} / (1 - x_n)`, domain `S^{n-1} \ {+e_n}`
    Phi,
    /// `x ↦ x_{1..n-1} / (1 + x_n)`, domain `S^{n-1} \ {-e_n}`
    Psi,
}

impl ChartId {
    pub fn name(self) -> &'static str {
        match self {
            ChartId::Phi => "phi",
            ChartId::Psi => "psi",
        }
    }

    /// `+1` for `Phi`, `-1` for `Psi`: the sign of the excluded pole.
    fn pole_sign(self) -> f64 {
        match self {
            ChartId::Phi => 1.0,
            ChartId::Psi => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chart {
    pub id: ChartId,
    /// Ambient dimension of the sphere.
    pub n: usize,
}

impl Chart {
    pub fn phi(n: usize) -> Self {
        Self { id: ChartId::Phi, n }
    }

    pub fn psi(n: usize) -> Self {
        Self { id: ChartId::Psi, n }
    }

    pub fn excluded_pole(&self) -> Vec<f64> {
        let mut pole = unit(self.n, self.n - 1);
        pole[self.n - 1] = self.id.pole_sign();
        pole
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        distance(p, &self.excluded_pole()) > POLE_TOL
    }

    fn check_ambient(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n {
            return Err(Error::Shape(format!(
                "chart on S^{} expects {} coordinates, got {}",
                self.n - 1,
                self.n,
                p.len()
            )));
        }
        if !self.contains(p) {
            return Err(Error::ChartDomain {
                chart: self.id.name(),
            });
        }
        Ok(())
    }

    fn check_coords(&self, q: &[f64]) -> Result<()> {
        if q.len() + 1 != self.n {
            return Err(Error::Shape(format!(
                "chart coordinates must have length {}, got {}",
                self.n - 1,
                q.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_ambient(p)?;
        let sign = self.id.pole_sign();
        let denom = 1.0 - sign * p[self.n - 1];
        Ok(p[..self.n - 1].iter().map(|v| v / denom).collect())
    }

    pub fn inverse(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_coords(q)?;
        let s = q.iter().map(|v| v * v).sum::<f64>();
        let mut p: Vec<f64> = q.iter().map(|v| 2.0 * v / (1.0 + s)).collect();
        p.push(self.id.pole_sign() * (s - 1.0) / (s + 1.0));
        Ok(p)
    }

    /// `(n-1) x n` derivative of `forward` as a map on `R^n`.
    pub fn jacobian_forward(&self, p: &[f64]) -> Result<Matrix> {
        self.check_ambient(p)?;
        let sign = self.id.pole_sign();
        let last = self.n - 1;
        let denom = 1.0 - sign * p[last];
        let mut j = Matrix::zeros(last, self.n);
        for i in 0..last {
            j[(i, i)] = 1.0 / denom;
            j[(i, last)] = sign * p[i] / (denom * denom);
        }
        Ok(j)
    }

    /// `n x (n-1)` derivative of `inverse`.
    pub fn jacobian_inverse(&self, q: &[f64]) -> Result<Matrix> {
        self.check_coords(q)?;
        let s = q.iter().map(|v| v * v).sum::<f64>();
        let d = 1.0 + s;
        let last = self.n - 1;
        let mut j = Matrix::zeros(self.n, last);
        for i in 0..last {
            for k in 0..last {
                let delta = if i == k { 1.0 } else { 0.0 };
                j[(i, k)] = 2.0 * delta / d - 4.0 * q[i] * q[k] / (d * d);
            }
        }
        for k in 0..last {
            j[(last, k)] = self.id.pole_sign() * 4.0 * q[k] / (d * d);
        }
        Ok(j)
    }
}

/// Applies `ψ ∘ φ⁻¹`-style transition maps; exposed for overlap checks.
pub fn transition(from: &Chart, to: &Chart, q: &[f64]) -> Result<Vec<f64>> {
    to.forward(&from.inverse(q)?)
}
