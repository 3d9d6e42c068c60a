//! The classical participation-factor parametrization `u = u₀ − α·1ᵀ(d − d₀)`
//! over `(u₀, α)`, for all-Gaussian demand.
//!
//! Every generator sees the same scalar imbalance, so its standard
//! deviation is `|α_i|·σ_tot` with `σ_tot² = Σ γ_ℓ (1ᵀd_ℓ)²`, and line `j`
//! carries the coefficients `φ_j d_ℓ − (φ_j α)(1ᵀd_ℓ)`.

use crate::conic::{AffExpr, ConicBuilder, ConicProblem};

use super::{push_cone, CcOpfProblem, FormulationError};

#[derive(Debug, Clone)]
pub struct GaussianReference {
    pub conic: ConicProblem,
    pub n_bus: usize,
    /// `1ᵀd_ℓ` for `ℓ = 1..=L`.
    pub imbalance: Vec<f64>,
}

impl GaussianReference {
    pub fn u0_index(&self, bus: usize) -> usize {
        bus
    }

    pub fn alpha_index(&self, bus: usize) -> usize {
        self.n_bus + bus
    }

    /// Policy coefficients `(u₀, U)` with `U` row-major `N×L`, from a
    /// solution vector.
    pub fn policy_coefficients(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_bus;
        let l = self.imbalance.len();
        let u0 = x[..n].to_vec();
        let mut u = vec![0.0; n * l];
        for i in 0..n {
            for k in 0..l {
                u[i * l + k] = -x[n + i] * self.imbalance[k];
            }
        }
        (u0, u)
    }
}

pub fn build_gaussian_reference(problem: &CcOpfProblem) -> Result<GaussianReference, FormulationError> {
    if let Some(s) = problem.demand.sources.iter().find(|s| !s.distribution.is_gaussian()) {
        return Err(FormulationError::NonGaussian(s.id.clone()));
    }
    let grid = &problem.grid;
    let n = grid.n_bus();
    let l = problem.demand.l();
    let d0 = problem.demand.d0();
    let dm = problem.demand.d_matrix();
    let gam = problem.demand.pce.basis.gammas();
    let sums = problem.demand.column_sums();
    let imbalance = sums[1..].to_vec();
    let sigma_tot = imbalance
        .iter()
        .zip(&gam)
        .map(|(s, g)| g * s * s)
        .sum::<f64>()
        .sqrt();
    let beta_u = problem.chance.beta_gen()?;
    let beta_l = problem.chance.beta_line()?;

    let mut b = ConicBuilder::new();
    for i in 0..n {
        let (lo, hi) = if grid.generator_at(i).is_some() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (0.0, 0.0)
        };
        b.add_var(format!("u0[{}]", grid.bus_ids[i]), lo, hi, problem.cost.linear[i]);
    }
    for i in 0..n {
        let (lo, hi) = if grid.generator_at(i).is_some() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (0.0, 0.0)
        };
        b.add_var(format!("alpha[{}]", grid.bus_ids[i]), lo, hi, 0.0);
    }
    let mut bal = AffExpr::constant(sums[0]);
    let mut part = AffExpr::constant(-1.0);
    for i in 0..n {
        bal = bal.term(i, 1.0);
        part = part.term(n + i, 1.0);
    }
    b.add_eq(&bal);
    b.add_eq(&part);

    for i in grid.generator_buses() {
        let g = grid.generator_at(i).expect("generator bus");
        for (bound, sign) in [(g.u_max, 1.0), (g.u_min, -1.0)] {
            if bound.is_finite() {
                let head = AffExpr::constant(sign * bound).term(i, -sign);
                let tail = vec![AffExpr::constant(0.0).term(n + i, beta_u * sigma_tot)];
                push_cone(&mut b, head, tail, beta_u);
            }
        }
    }

    for (j, line) in grid.lines.iter().enumerate() {
        let phi = problem.ptdf.row(j);
        let flow0: f64 = phi.iter().zip(d0).map(|(a, b)| a * b).sum();
        let (lo, hi) = line.limits;
        for (bound, sign) in [(hi, 1.0), (lo, -1.0)] {
            if !bound.is_finite() {
                continue;
            }
            let mut head = AffExpr::constant(sign * (bound - flow0));
            for (i, &f) in phi.iter().enumerate() {
                if f != 0.0 {
                    head = head.term(i, -sign * f);
                }
            }
            let tail: Vec<AffExpr> = (0..l)
                .map(|k| {
                    let w = beta_l * gam[k].sqrt();
                    let dl: f64 = (0..n).map(|i| phi[i] * dm[i * l + k]).sum();
                    let mut e = AffExpr::constant(w * dl);
                    for (i, &f) in phi.iter().enumerate() {
                        if f != 0.0 && grid.generator_at(i).is_some() {
                            e = e.term(n + i, -w * f * imbalance[k]);
                        }
                    }
                    e
                })
                .collect();
            push_cone(&mut b, head, tail, beta_l);
        }
    }

    if !problem.cost.quadratic.is_zero() {
        // ½u₀ᵀHu₀ + ½σ_tot² αᵀHα
        for (offset, w) in [(0, 1.0), (n, sigma_tot * sigma_tot)] {
            for frow in problem.cost.quadratic.factor() {
                let terms: Vec<(usize, f64)> = frow
                    .into_iter()
                    .filter(|&(i, _)| grid.generator_at(i).is_some())
                    .map(|(i, v)| (offset + i, v))
                    .collect();
                b.add_square(&terms, w);
            }
        }
    }

    Ok(GaussianReference {
        conic: b.build(),
        n_bus: n,
        imbalance,
    })
}
