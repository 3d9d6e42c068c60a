use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::FormulationError;
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMatrix {
    Diagonal(Vec<f64>),
    /// Row-major `N × N`.
    Dense(Vec<f64>),
}

impl CostMatrix {
    pub fn is_zero(&self) -> bool {
        match self {
            CostMatrix::Diagonal(d) => d.iter().all(|&v| v == 0.0),
            CostMatrix::Dense(m) => m.iter().all(|&v| v == 0.0),
        }
    }

    /// `uᵀHu`.
    pub fn quad_form(&self, u: &[f64]) -> f64 {
        match self {
            CostMatrix::Diagonal(d) => d.iter().zip(u).map(|(h, x)| h * x * x).sum(),
            CostMatrix::Dense(m) => {
                let n = u.len();
                (0..n)
                    .map(|i| u[i] * (0..n).map(|j| m[i * n + j] * u[j]).sum::<f64>())
                    .sum()
            }
        }
    }

    /// Sparse rows of some `R` with `RᵀR = H`.
    pub fn factor(&self) -> Vec<Vec<(usize, f64)>> {
        match self {
            CostMatrix::Diagonal(d) => d
                .iter()
                .enumerate()
                .filter(|(_, &h)| h > 0.0)
                .map(|(i, &h)| vec![(i, h.sqrt())])
                .collect(),
            CostMatrix::Dense(m) => {
                let n = (m.len() as f64).sqrt().round() as usize;
                let h = Mat::<f64>::from_fn(n, n, |i, j| m[i * n + j]);
                let eig = h.self_adjoint_eigen(Side::Lower).expect("symmetric eigenproblem");
                let (s, q) = (eig.S(), eig.U());
                let top = (0..n).fold(0.0f64, |a, k| a.max(s[k]));
                (0..n)
                    .filter(|&k| s[k] > 1e-14 * top)
                    .map(|k| {
                        let r = s[k].sqrt();
                        (0..n)
                            .map(|i| (i, r * q[(i, k)]))
                            .filter(|e| e.1 != 0.0)
                            .collect()
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, n: usize) -> Result<(), FormulationError> {
        match self {
            CostMatrix::Diagonal(d) => {
                if d.len() != n {
                    return Err(FormulationError::Dimension(format!("{} cost diagonal entries for {n} buses", d.len())));
                }
                if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(FormulationError::NotPsd(format!("diagonal entry {v}")));
                }
            }
            CostMatrix::Dense(m) => {
                if m.len() != n * n {
                    return Err(FormulationError::Dimension(format!("{} cost entries for {n} buses", m.len())));
                }
                let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for i in 0..n {
                    for j in 0..i {
                        if (m[i * n + j] - m[j * n + i]).abs() > 1e-12 * scale.max(1.0) {
                            return Err(FormulationError::NotPsd(format!("asymmetric at ({i}, {j})")));
                        }
                    }
                }
                let h = Mat::<f64>::from_fn(n, n, |i, j| m[i * n + j]);
                let eig = h
                    .self_adjoint_eigen(Side::Lower)
                    .map_err(|e| FormulationError::NotPsd(format!("{e:?}")))?;
                let s = eig.S();
                let min = (0..n).fold(f64::INFINITY, |a, k| a.min(s[k]));
                if min < -1e-10 * scale.max(1.0) {
                    return Err(FormulationError::NotPsd(format!("eigenvalue {min}")));
                }
            }
        }
        Ok(())
    }
}

/// `J(u) = ½ uᵀHu + hᵀu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub quadratic: CostMatrix,
    pub linear: Vec<f64>,
}

impl CostSpec {
    pub fn from_grid(grid: &Grid) -> Self {
        let (quad, lin) = grid.cost_vectors();
        CostSpec {
            quadratic: CostMatrix::Diagonal(quad),
            linear: lin,
        }
    }

    pub fn linear_only(linear: Vec<f64>) -> Self {
        CostSpec {
            quadratic: CostMatrix::Diagonal(vec![0.0; linear.len()]),
            linear,
        }
    }

    pub fn evaluate(&self, u: &[f64]) -> f64 {
        0.5 * self.quadratic.quad_form(u) + self.linear.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), FormulationError> {
        if self.linear.len() != n {
            return Err(FormulationError::Dimension(format!(
                "{} linear cost entries for {n} buses",
                self.linear.len()
            )));
        }
        if self.linear.iter().any(|v| !v.is_finite()) {
            return Err(FormulationError::Dimension("non-finite linear cost".into()));
        }
        self.quadratic.validate(n)
    }
}
