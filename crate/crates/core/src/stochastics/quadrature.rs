//! Gauss quadrature rules from three-term recurrences (Golub–Welsch).
//!
//! Rules for probability measures have weights summing to one. Each rule is
//! built from the monic recurrence `p_{k+1} = (x − a_k) p_k − b_k p_{k−1}`:
//! the nodes are the eigenvalues of the symmetric Jacobi matrix with
//! diagonal `a_k` and off-diagonal `√b_k`, the weights the squared first
//! components of its normalized eigenvectors.

use faer::{Mat, Side};

/// Default node count for inner products and γ constants.
pub const DEFAULT_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// `diag` holds `a_0..a_{n−1}`, `offdiag` holds `b_1..b_{n−1}`.
    pub fn golub_welsch(diag: &[f64], offdiag: &[f64]) -> Self {
        let n = diag.len();
        assert_eq!(offdiag.len() + 1, n.max(1));
        let mut jacobi = Mat::<f64>::zeros(n, n);
        for k in 0..n {
            jacobi[(k, k)] = diag[k];
        }
        for (k, &b) in offdiag.iter().enumerate() {
            let s = b.sqrt();
            jacobi[(k + 1, k)] = s;
            jacobi[(k, k + 1)] = s;
        }
        let eig = jacobi
            .self_adjoint_eigen(Side::Lower)
            .expect("symmetric tridiagonal eigenproblem");
        let values = eig.S();
        let vectors = eig.U();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (values[k], vectors[(0, k)] * vectors[(0, k)]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        QuadratureRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Standard normal measure (probabilists' Hermite).
    pub fn hermite(n: usize) -> Self {
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
        Self::golub_welsch(&diag, &off)
    }

    /// Uniform probability measure on `[0, 1]` (shifted Legendre).
    pub fn uniform01(n: usize) -> Self {
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k * k / (4.0 * k * k - 1.0)
            })
            .collect();
        Self::golub_welsch(&diag, &off).affine(0.5, 0.5)
    }

    /// Beta(a, b) probability measure on `[0, 1]`, via Gauss–Jacobi with
    /// exponents α = b − 1 on `(1 − x)` and β = a − 1 on `(1 + x)`.
    pub fn beta(n: usize, a: f64, b: f64) -> Self {
        let (alpha, beta) = (b - 1.0, a - 1.0);
        let ab = alpha + beta;
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                if k == 0 {
                    (beta - alpha) / (ab + 2.0)
                } else {
                    let k = k as f64;
                    (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
                }
            })
            .collect();
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                let s = 2.0 * k + ab;
                if k == 1.0 {
                    // (k + α + β) cancels against (s − 1)
                    4.0 * (1.0 + alpha) * (1.0 + beta) / (s * s * (s + 1.0))
                } else {
                    4.0 * k * (k + alpha) * (k + beta) * (k + ab)
                        / (s * s * (s + 1.0) * (s - 1.0))
                }
            })
            .collect();
        Self::golub_welsch(&diag, &off).affine(0.5, 0.5)
    }

    /// Gamma(p, 1) probability measure on `[0, ∞)` (generalized Laguerre
    /// with parameter p − 1).
    pub fn gamma(n: usize, shape: f64) -> Self {
        let alpha = shape - 1.0;
        let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k * (k + alpha)
            })
            .collect();
        Self::golub_welsch(&diag, &off)
    }

    /// Gauss–Legendre nodes on `[lo, hi]` with Lebesgue weights summing to
    /// `hi − lo`.
    pub fn legendre_on(n: usize, lo: f64, hi: f64) -> Self {
        let mut rule = Self::uniform01(n);
        let width = hi - lo;
        for (x, w) in rule.nodes.iter_mut().zip(rule.weights.iter_mut()) {
            *x = lo + width * *x;
            *w *= width;
        }
        rule
    }

    fn affine(mut self, shift: f64, scale: f64) -> Self {
        for x in &mut self.nodes {
            *x = shift + scale * *x;
        }
        self
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(rule: &QuadratureRule, k: i32) -> f64 {
        rule.integrate(|x| x.powi(k))
    }

    #[test]
    fn hermite_moments() {
        let r = QuadratureRule::hermite(20);
        assert!((moment(&r, 0) - 1.0).abs() < 1e-14);
        assert!(moment(&r, 1).abs() < 1e-13);
        assert!((moment(&r, 2) - 1.0).abs() < 1e-12);
        assert!((moment(&r, 4) - 3.0).abs() < 1e-11);
    }

    #[test]
    fn beta_moments_match_closed_form() {
        // E[ξ] = a/(a+b), E[ξ²] = a(a+1)/((a+b)(a+b+1))
        for &(a, b) in &[(4.0, 2.0), (0.5, 0.5), (7.0, 7.0), (3.0, 8.0)] {
            let r = QuadratureRule::beta(30, a, b);
            assert!((moment(&r, 1) - a / (a + b)).abs() < 1e-13);
            let m2 = a * (a + 1.0) / ((a + b) * (a + b + 1.0));
            assert!((moment(&r, 2) - m2).abs() < 1e-13);
            assert!(r.nodes.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn gamma_moments() {
        let r = QuadratureRule::gamma(40, 2.5);
        assert!((moment(&r, 1) - 2.5).abs() < 1e-10);
        // Var = p
        assert!((moment(&r, 2) - 2.5 * 3.5).abs() < 1e-9);
    }

    #[test]
    fn legendre_integrates_sine() {
        let r = QuadratureRule::legendre_on(64, 0.0, std::f64::consts::PI);
        assert!((r.integrate(f64::sin) - 2.0).abs() < 1e-13);
    }
}
