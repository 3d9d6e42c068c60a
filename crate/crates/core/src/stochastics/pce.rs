use std::sync::Arc;

use super::basis::MultivariateBasis;
use super::StochasticsError;

/// Exact affine PCE `x̂ = x₀ + Xψ` of an `n_x`-dimensional random vector.
#[derive(Debug, Clone)]
pub struct AffinePce {
    pub x0: Vec<f64>,
    /// Row-major `n_x × L`; column `ℓ` is `x_ℓ`.
    pub coeffs: Vec<f64>,
    pub basis: Arc<MultivariateBasis>,
}

impl AffinePce {
    pub fn new(
        x0: Vec<f64>,
        coeffs: Vec<f64>,
        basis: Arc<MultivariateBasis>,
    ) -> Result<Self, StochasticsError> {
        if coeffs.len() != x0.len() * basis.l() {
            return Err(StochasticsError::Dimension(format!(
                "{} coefficients for {} entries and {} basis terms",
                coeffs.len(),
                x0.len(),
                basis.l()
            )));
        }
        if x0.iter().chain(&coeffs).any(|v| !v.is_finite()) {
            return Err(StochasticsError::InvalidParameter(
                "non-finite PCE coefficient".into(),
            ));
        }
        Ok(AffinePce { x0, coeffs, basis })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn l(&self) -> usize {
        self.basis.l()
    }

    pub fn coeff(&self, i: usize, l: usize) -> f64 {
        self.coeffs[i * self.l() + l]
    }

    /// Column `x_ℓ` for `ℓ = 1..=L` (one-based, as in the expansion).
    pub fn column(&self, l: usize) -> Vec<f64> {
        assert!(l >= 1 && l <= self.l());
        (0..self.dim()).map(|i| self.coeff(i, l - 1)).collect()
    }

    /// `x₀ + Xψ` for given basis values `ψ₁..ψ_L`.
    pub fn evaluate_psi(&self, psi: &[f64]) -> Vec<f64> {
        let l = self.l();
        (0..self.dim())
            .map(|i| {
                let row = &self.coeffs[i * l..(i + 1) * l];
                self.x0[i] + row.iter().zip(psi).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn evaluate(&self, xi: &[f64]) -> Vec<f64> {
        self.evaluate_psi(&self.basis.psi(xi))
    }

    /// Per-entry standard deviations `√(Σ_ℓ γ_ℓ x_{iℓ}²)`.
    pub fn std_devs(&self) -> Vec<f64> {
        let gammas = self.basis.gammas();
        let l = self.l();
        (0..self.dim())
            .map(|i| {
                self.coeffs[i * l..(i + 1) * l]
                    .iter()
                    .zip(&gammas)
                    .map(|(x, g)| g * x * x)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Mean `x₀` and row-major covariance `Σ_ℓ γ_ℓ x_ℓ x_ℓᵀ`.
pub fn moments(pce: &AffinePce) -> (Vec<f64>, Vec<f64>) {
    let n = pce.dim();
    let l = pce.l();
    let gammas = pce.basis.gammas();
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..l)
                .map(|k| gammas[k] * pce.coeffs[i * l + k] * pce.coeffs[j * l + k])
                .sum();
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }
    (pce.x0.clone(), cov)
}
