use super::germ::GermComponent;
use super::quadrature::DEFAULT_NODES;
use super::StochasticsError;

/// Affine tensor basis `{1, ψ¹₁(ξ₁), …, ψⁿ₁(ξₙ)}` over independent germs.
#[derive(Debug, Clone)]
pub struct MultivariateBasis {
    pub components: Vec<GermComponent>,
}

pub fn tensorize(components: Vec<GermComponent>) -> Result<MultivariateBasis, StochasticsError> {
    if components.is_empty() {
        return Err(StochasticsError::EmptyBasis);
    }
    Ok(MultivariateBasis { components })
}

impl MultivariateBasis {
    /// Number of non-constant basis terms (equals the number of germs).
    pub fn l(&self) -> usize {
        self.components.len()
    }

    pub fn n_xi(&self) -> usize {
        self.components.len()
    }

    /// `[γ₁, …, γ_L]`.
    pub fn gammas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.gamma1).collect()
    }

    /// Germ map `ψ = a + Bξ` with diagonal `B`, returned as `(a, diag B)`.
    pub fn germ_map(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.components.iter().map(|c| c.psi_offset).collect(),
            self.components.iter().map(|c| c.psi_slope).collect(),
        )
    }

    /// `[ψ₁(ξ), …, ψ_L(ξ)]`.
    pub fn psi(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.n_xi());
        self.components
            .iter()
            .zip(xi)
            .map(|(c, &x)| c.psi1(x))
            .collect()
    }

    /// Inverse of the germ map for one component.
    pub fn xi_from_psi(&self, psi: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .zip(psi)
            .map(|(c, &p)| (p - c.psi_offset) / c.psi_slope)
            .collect()
    }

    /// Row-major `(L+1)×(L+1)` Gram matrix `⟨ψ_i, ψ_j⟩` under the product
    /// measure. Products of distinct components factor into 1-D integrals,
    /// each evaluated by Gauss quadrature.
    pub fn gram_matrix(&self) -> Vec<f64> {
        let n = self.l() + 1;
        let mut first = vec![0.0; n];
        let mut second = vec![0.0; n];
        first[0] = 1.0;
        second[0] = 1.0;
        for (k, c) in self.components.iter().enumerate() {
            let rule = c.quadrature(DEFAULT_NODES);
            first[k + 1] = rule.integrate(|x| c.psi1(x));
            second[k + 1] = rule.integrate(|x| c.psi1(x).powi(2));
            let mass = rule.integrate(|_| 1.0);
            first[0] *= mass;
            second[0] *= mass;
        }
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = if i == j {
                    second[i]
                } else {
                    first[i] * first[j]
                };
            }
        }
        gram
    }
}
