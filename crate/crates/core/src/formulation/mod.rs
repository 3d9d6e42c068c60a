//! Chance-constrained OPF as a second-order cone program over PCE
//! coefficients.
//!
//! With demand `d = d₀ + Σ d_ℓ ψ_ℓ` and the policy `u = u₀ + Σ u_ℓ ψ_ℓ`,
//! every quantity is an affine expansion whose mean is the zeroth
//! coefficient and whose variance is `Σ γ_ℓ x_ℓ²`. The individual chance
//! constraints become
//!
//! ```text
//! x̄ − x₀ ≥ β ‖(√γ_ℓ x_ℓ)_ℓ‖        x₀ − x̲ ≥ β ‖(√γ_ℓ x_ℓ)_ℓ‖
//! ```
//!
//! for generation `x = u_i` and line flows `x = φ_j(u + d)`, and power
//! balance holds for every realization iff `1ᵀ(d_ℓ + u_ℓ) = 0` for all ℓ.
//! Variables are laid out ℓ-major: `u_{i,ℓ}` has index `ℓ·N + i`.

mod cost;
mod gaussian;

pub use cost::{CostMatrix, CostSpec};
pub use gaussian::{build_gaussian_reference, GaussianReference};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::conic::{AffExpr, ConicBuilder, ConicProblem};
use crate::grid::{compute_ptdf, Grid, GridError, Ptdf};
use crate::uncertainty::DemandPce;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("risk level {0} outside (0, 0.5]")]
    Epsilon(f64),
    #[error("explicit β must be finite and nonnegative, got {0}")]
    Beta(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cost matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),
    #[error("source '{0}' is not Gaussian")]
    NonGaussian(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRule {
    /// `√((1 − ε)/ε)`, valid for any distribution with the given moments.
    DistributionallyRobust,
    /// `Φ⁻¹(1 − ε)`, exact for Gaussian quantities.
    GaussianExact,
    Explicit(f64),
}

pub fn beta_factor(rule: BetaRule, epsilon: f64) -> Result<f64, FormulationError> {
    if let BetaRule::Explicit(b) = rule {
        return if b.is_finite() && b >= 0.0 {
            Ok(b)
        } else {
            Err(FormulationError::Beta(b))
        };
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(FormulationError::Epsilon(epsilon));
    }
    Ok(match rule {
        BetaRule::DistributionallyRobust => ((1.0 - epsilon) / epsilon).sqrt(),
        BetaRule::GaussianExact => {
            let q = Normal::standard().inverse_cdf(1.0 - epsilon);
            // the quantile routine is not exactly antisymmetric at ½
            if epsilon == 0.5 {
                0.0
            } else {
                q
            }
        }
        BetaRule::Explicit(_) => unreachable!(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceSpec {
    pub epsilon_gen: f64,
    pub epsilon_line: f64,
    pub beta_rule: BetaRule,
}

impl ChanceSpec {
    pub fn new(epsilon: f64, beta_rule: BetaRule) -> Self {
        ChanceSpec {
            epsilon_gen: epsilon,
            epsilon_line: epsilon,
            beta_rule,
        }
    }

    pub fn validate(&self) -> Result<(), FormulationError> {
        for e in [self.epsilon_gen, self.epsilon_line] {
            if !(e > 0.0 && e <= 0.5) {
                return Err(FormulationError::Epsilon(e));
            }
        }
        self.beta_gen().and(self.beta_line()).map(|_| ())
    }

    pub fn beta_gen(&self) -> Result<f64, FormulationError> {
        beta_factor(self.beta_rule, self.epsilon_gen)
    }

    pub fn beta_line(&self) -> Result<f64, FormulationError> {
        beta_factor(self.beta_rule, self.epsilon_line)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FormulationOptions {
    /// Restrict the policy to `u_ℓ = −α·(1ᵀd_ℓ)`: every generator reacts
    /// to the total imbalance only, with one participation factor each.
    pub global_balancing: bool,
}

#[derive(Debug, Clone)]
pub struct CcOpfProblem {
    pub grid: Grid,
    pub ptdf: Ptdf,
    pub demand: DemandPce,
    pub cost: CostSpec,
    pub chance: ChanceSpec,
    pub options: FormulationOptions,
}

/// Index map of the assembled program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_bus: usize,
    pub l: usize,
}

impl Layout {
    pub fn u(&self, bus: usize, l: usize) -> usize {
        l * self.n_bus + bus
    }

    pub fn n_policy_vars(&self) -> usize {
        self.n_bus * (self.l + 1)
    }
}

impl CcOpfProblem {
    pub fn new(
        grid: Grid,
        demand: DemandPce,
        cost: CostSpec,
        chance: ChanceSpec,
    ) -> Result<Self, FormulationError> {
        let n = grid.n_bus();
        if demand.pce.dim() != n {
            return Err(FormulationError::Dimension(format!(
                "demand has {} entries for {n} buses",
                demand.pce.dim()
            )));
        }
        cost.validate(n)?;
        chance.validate()?;
        let ptdf = compute_ptdf(&grid, grid.slack_bus)?;
        Ok(CcOpfProblem {
            grid,
            ptdf,
            demand,
            cost,
            chance,
            options: FormulationOptions::default(),
        })
    }

    /// Uses the grid's own generator cost data.
    pub fn with_grid_costs(grid: Grid, demand: DemandPce, chance: ChanceSpec) -> Result<Self, FormulationError> {
        let cost = CostSpec::from_grid(&grid);
        Self::new(grid, demand, cost, chance)
    }

    pub fn with_options(mut self, options: FormulationOptions) -> Self {
        self.options = options;
        self
    }

    pub fn layout(&self) -> Layout {
        Layout {
            n_bus: self.grid.n_bus(),
            l: self.demand.l(),
        }
    }

    /// `√γ_ℓ` for `ℓ = 1..=L`.
    pub fn sqrt_gammas(&self) -> Vec<f64> {
        self.demand.pce.basis.gammas().iter().map(|g| g.sqrt()).collect()
    }

    /// `J(u₀) + ½ Σ γ_ℓ u_ℓᵀHu_ℓ` for coefficients `u0` and row-major `N×L`
    /// matrix `u`.
    pub fn expected_cost(&self, u0: &[f64], u: &[f64]) -> f64 {
        let (n, l) = (self.grid.n_bus(), self.demand.l());
        let gam = self.demand.pce.basis.gammas();
        let mut total = self.cost.evaluate(u0);
        for k in 0..l {
            let col: Vec<f64> = (0..n).map(|i| u[i * l + k]).collect();
            total += gam[k] * 0.5 * self.cost.quadratic.quad_form(&col);
        }
        total
    }
}

/// Assembles the SOCP. Generation limits of units and finite line limits
/// each give one cone per side; buses without a unit have their
/// coefficients fixed to zero by bounds.
pub fn build_socp(problem: &CcOpfProblem) -> Result<ConicProblem, FormulationError> {
    let grid = &problem.grid;
    let n = grid.n_bus();
    let l = problem.demand.l();
    let layout = problem.layout();
    let d0 = problem.demand.d0();
    let dm = problem.demand.d_matrix();
    let sg = problem.sqrt_gammas();
    let beta_u = problem.chance.beta_gen()?;
    let beta_l = problem.chance.beta_line()?;
    if problem.cost.linear.len() != n {
        return Err(FormulationError::Dimension("cost vector length".into()));
    }

    // a zero column of D gives no reason to react; its coefficients only
    // add variance and cost, so they are fixed at zero
    let active: Vec<bool> = (0..l).map(|k| (0..n).any(|i| dm[i * l + k] != 0.0)).collect();

    let mut b = ConicBuilder::new();
    for ll in 0..=l {
        for i in 0..n {
            let has_gen = grid.generator_at(i).is_some();
            let free = has_gen && (ll == 0 || active[ll - 1]);
            let (lo, hi) = if free {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (0.0, 0.0)
            };
            let cost = if ll == 0 { problem.cost.linear[i] } else { 0.0 };
            let idx = b.add_var(format!("u[{},{ll}]", grid.bus_ids[i]), lo, hi, cost);
            debug_assert_eq!(idx, layout.u(i, ll));
        }
    }

    // balance for every coefficient
    for ll in 0..=l {
        let mut e = AffExpr::constant((0..n).map(|i| d_coef(d0, dm, l, i, ll)).sum());
        for i in 0..n {
            e = e.term(layout.u(i, ll), 1.0);
        }
        b.add_eq(&e);
    }

    if problem.options.global_balancing {
        add_global_balancing(&mut b, problem, &layout);
    }

    // generation limits
    for i in grid.generator_buses() {
        let g = grid.generator_at(i).expect("generator bus");
        for (bound, sign) in [(g.u_max, 1.0), (g.u_min, -1.0)] {
            if !bound.is_finite() {
                continue;
            }
            // sign·(bound − u₀) ≥ β σ
            let head = AffExpr::constant(sign * bound).term(layout.u(i, 0), -sign);
            let tail: Vec<AffExpr> = (1..=l)
                .map(|ll| AffExpr::constant(0.0).term(layout.u(i, ll), beta_u * sg[ll - 1]))
                .collect();
            push_cone(&mut b, head, tail, beta_u);
        }
    }

    // line limits
    for (j, line) in grid.lines.iter().enumerate() {
        let phi = problem.ptdf.row(j);
        let (lo, hi) = line.limits;
        for (bound, sign) in [(hi, 1.0), (lo, -1.0)] {
            if !bound.is_finite() {
                continue;
            }
            let flow0: f64 = phi.iter().zip(d0).map(|(a, b)| a * b).sum();
            let mut head = AffExpr::constant(sign * (bound - flow0));
            for (i, &f) in phi.iter().enumerate() {
                if f != 0.0 {
                    head = head.term(layout.u(i, 0), -sign * f);
                }
            }
            let tail: Vec<AffExpr> = (1..=l)
                .map(|ll| {
                    let w = beta_l * sg[ll - 1];
                    let dl: f64 = (0..n).map(|i| phi[i] * dm[i * l + ll - 1]).sum();
                    let mut e = AffExpr::constant(w * dl);
                    for (i, &f) in phi.iter().enumerate() {
                        if f != 0.0 && grid.generator_at(i).is_some() {
                            e = e.term(layout.u(i, ll), w * f);
                        }
                    }
                    e
                })
                .collect();
            push_cone(&mut b, head, tail, beta_l);
        }
    }

    add_quadratic_cost(&mut b, problem, &layout, &sg);
    Ok(b.build())
}

fn d_coef(d0: &[f64], dm: &[f64], l: usize, i: usize, ll: usize) -> f64 {
    if ll == 0 {
        d0[i]
    } else {
        dm[i * l + ll - 1]
    }
}

fn push_cone(b: &mut ConicBuilder, head: AffExpr, tail: Vec<AffExpr>, beta: f64) {
    if beta == 0.0 || tail.iter().all(|e| e.terms.is_empty() && e.constant == 0.0) {
        b.add_nonneg(&[head]);
    } else {
        let mut rows = Vec::with_capacity(tail.len() + 1);
        rows.push(head);
        rows.extend(tail);
        b.add_soc(&rows);
    }
}

/// `u_{i,ℓ}·s_r − u_{i,r}·s_ℓ = 0` with `s_ℓ = 1ᵀd_ℓ` and `r` the column of
/// largest imbalance; columns with `s_ℓ = 0` get `u_{i,ℓ} = 0`.
fn add_global_balancing(b: &mut ConicBuilder, problem: &CcOpfProblem, layout: &Layout) {
    let l = layout.l;
    let sums = problem.demand.column_sums();
    let Some(r) = (1..=l).max_by(|&a, &c| sums[a].abs().total_cmp(&sums[c].abs())) else {
        return;
    };
    if sums[r] == 0.0 {
        return;
    }
    for i in problem.grid.generator_buses() {
        for ll in (1..=l).filter(|&ll| ll != r) {
            b.add_eq(
                &AffExpr::constant(0.0)
                    .term(layout.u(i, ll), sums[r])
                    .term(layout.u(i, r), -sums[ll]),
            );
        }
    }
}

/// `t ≥ ‖R u₀‖² + Σ γ_ℓ ‖R u_ℓ‖²` through `(1 + t, 1 − t, 2w)` and cost `½t`.
/// `½ Σ_ℓ γ_ℓ u_ℓᵀ H u_ℓ` (with `γ_0 = 1`) as factor rows of `H`.
fn add_quadratic_cost(b: &mut ConicBuilder, problem: &CcOpfProblem, layout: &Layout, sg: &[f64]) {
    if problem.cost.quadratic.is_zero() {
        return;
    }
    let factor = problem.cost.quadratic.factor();
    for ll in 0..=layout.l {
        let w = if ll == 0 { 1.0 } else { sg[ll - 1] * sg[ll - 1] };
        for frow in &factor {
            let terms: Vec<(usize, f64)> = frow
                .iter()
                .filter(|&&(i, _)| problem.grid.generator_at(i).is_some())
                .map(|&(i, v)| (layout.u(i, ll), v))
                .collect();
            b.add_square(&terms, w);
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grid::{Generator, Line};
    use crate::uncertainty::{assemble_demand, Distribution, UncertaintySource};

    pub(crate) fn three_bus_grid(h_quad: [f64; 2]) -> Grid {
        let line = |from, to| Line {
            from,
            to,
            reactance: 1.0,
            limits: (f64::NEG_INFINITY, f64::INFINITY),
        };
        Grid::new(
            "three-bus",
            vec![1, 2, 3],
            vec![0.0, 0.0, 0.0],
            vec![line(0, 1), line(1, 2), line(0, 2)],
            vec![
                Generator {
                    bus: 0,
                    u_min: f64::NEG_INFINITY,
                    u_max: 0.85,
                    cost_linear: 0.5,
                    cost_quadratic: h_quad[0],
                },
                Generator {
                    bus: 1,
                    u_min: f64::NEG_INFINITY,
                    u_max: f64::INFINITY,
                    cost_linear: 0.6,
                    cost_quadratic: h_quad[1],
                },
            ],
            None,
        )
        .unwrap()
    }

    pub(crate) fn beta_problem(eps: f64) -> CcOpfProblem {
        let grid = three_bus_grid([0.2, 0.2]);
        let src = UncertaintySource::at_bus(
            &grid,
            "load3",
            2,
            Distribution::Beta {
                a: 4.0,
                b: 2.0,
                lo: -1.5,
                hi: -0.9,
            },
        )
        .unwrap();
        let demand = assemble_demand(&grid, vec![src]).unwrap();
        CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(eps, BetaRule::DistributionallyRobust)).unwrap()
    }

    pub(crate) fn sin_problem(eps: f64) -> CcOpfProblem {
        use crate::stochastics::CustomDensity;
        let grid = three_bus_grid([0.2, 0.1]);
        let src = UncertaintySource::at_bus(
            &grid,
            "load3",
            2,
            Distribution::Custom {
                density: CustomDensity::Sinusoidal,
                lo: -1.9,
                hi: -0.9,
            },
        )
        .unwrap();
        let demand = assemble_demand(&grid, vec![src]).unwrap();
        CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(eps, BetaRule::GaussianExact)).unwrap()
    }

    #[test]
    fn beta_factors() {
        let dr = beta_factor(BetaRule::DistributionallyRobust, 0.05).unwrap();
        assert!((dr - 19f64.sqrt()).abs() < 1e-14);
        let g = beta_factor(BetaRule::GaussianExact, 0.05).unwrap();
        assert!((g - 1.6448536269514722).abs() < 1e-9);
        assert_eq!(beta_factor(BetaRule::DistributionallyRobust, 0.5).unwrap(), 1.0);
        assert_eq!(beta_factor(BetaRule::GaussianExact, 0.5).unwrap(), 0.0);
        assert!(beta_factor(BetaRule::GaussianExact, 0.0).is_err());
        assert!(beta_factor(BetaRule::DistributionallyRobust, 1.0).is_err());
        assert!(ChanceSpec::new(0.6, BetaRule::GaussianExact).validate().is_err());
    }

    #[test]
    fn beta_case_structure() {
        let p = beta_problem(0.05);
        let socp = build_socp(&p).unwrap();
        // 3 buses × 2 coefficients
        assert_eq!(socp.n(), 6);
        // one balance row per coefficient
        assert_eq!(socp.b.len(), 2);
        assert!((socp.b[0] - 1.1).abs() < 1e-12 && (socp.b[1] + 0.1).abs() < 1e-12);
        // only the upper cone at bus 1
        assert_eq!(socp.cones.len(), 1);
        assert_eq!(socp.cones[0], crate::conic::Cone::Soc(2));
        // bus 3 coefficients are fixed
        assert_eq!((socp.lower[2], socp.upper[2]), (0.0, 0.0));
        assert_eq!((socp.lower[5], socp.upper[5]), (0.0, 0.0));
    }

    #[test]
    fn layout_is_l_major() {
        let p = beta_problem(0.1);
        let lay = p.layout();
        assert_eq!(lay.u(1, 1), 4);
        assert_eq!(lay.n_policy_vars(), 6);
    }

    #[test]
    fn mismatched_demand_rejected() {
        let grid = three_bus_grid([0.2, 0.2]);
        let other = Grid::new(
            "two",
            vec![1, 2],
            vec![0.0, -1.0],
            vec![Line {
                from: 0,
                to: 1,
                reactance: 1.0,
                limits: (f64::NEG_INFINITY, f64::INFINITY),
            }],
            vec![],
            None,
        )
        .unwrap();
        let demand = DemandPce::deterministic(&other);
        let err = CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(0.1, BetaRule::GaussianExact));
        assert!(matches!(err, Err(FormulationError::Dimension(_))));
    }
}
