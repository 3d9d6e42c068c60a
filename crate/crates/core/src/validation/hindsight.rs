//! Deterministic DC-OPF for one demand realization.
//!
//! With a positive diagonal cost and no line limit active, the optimum is
//! an equal-incremental-cost dispatch found by a λ search; otherwise the
//! quadratic program goes to the conic solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{self, AffExpr, ConicBuilder, ConicError, Settings, SolveStatus};
use crate::formulation::{CostMatrix, CostSpec};
use crate::grid::{Grid, Ptdf};

#[derive(Debug, Error)]
pub enum HindsightError {
    #[error("no dispatch balances the realization within the limits")]
    Infeasible,
    #[error("solver finished with status {0:?}")]
    Solver(SolveStatus),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HindsightMethod {
    LambdaSearch,
    Conic,
}

#[derive(Debug, Clone)]
pub struct HindsightSolution {
    pub u: Vec<f64>,
    pub objective: f64,
    pub method: HindsightMethod,
}

const LINE_TOL: f64 = 1e-9;

/// Solves `min ½uᵀHu + hᵀu` s.t. `1ᵀ(u + d) = 0`, generation limits and
/// line limits, for the realization `d`.
pub fn hindsight_opf(
    grid: &Grid,
    ptdf: &Ptdf,
    cost: &CostSpec,
    d: &[f64],
) -> Result<HindsightSolution, HindsightError> {
    HindsightSolver::new(grid, ptdf, cost).solve(d)
}

/// Reusable per-grid state for many hindsight solves.
#[derive(Debug, Clone)]
pub struct HindsightSolver<'a> {
    grid: &'a Grid,
    ptdf: &'a Ptdf,
    cost: &'a CostSpec,
    gens: Vec<usize>,
    /// Positive diagonal costs for every unit.
    separable: bool,
    limited_lines: Vec<usize>,
    pub settings: Settings,
}

impl<'a> HindsightSolver<'a> {
    pub fn new(grid: &'a Grid, ptdf: &'a Ptdf, cost: &'a CostSpec) -> Self {
        let gens = grid.generator_buses();
        let separable = match &cost.quadratic {
            CostMatrix::Diagonal(h) => gens.iter().all(|&i| h[i] > 0.0),
            CostMatrix::Dense(_) => false,
        };
        let limited_lines = grid
            .lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.limits.0.is_finite() || l.limits.1.is_finite())
            .map(|(j, _)| j)
            .collect();
        HindsightSolver {
            grid,
            ptdf,
            cost,
            gens,
            separable,
            limited_lines,
            settings: Settings {
                tol: 1e-10,
                ..Settings::default()
            },
        }
    }

    pub fn solve(&self, d: &[f64]) -> Result<HindsightSolution, HindsightError> {
        let n = self.grid.n_bus();
        if d.len() != n {
            return Err(HindsightError::Dimension(format!("{} demands for {n} buses", d.len())));
        }
        if self.gens.is_empty() {
            return Err(HindsightError::Infeasible);
        }
        if self.separable {
            let u = self.lambda_search(d)?;
            if self.lines_ok(&u, d) {
                return Ok(HindsightSolution {
                    objective: self.cost.evaluate(&u),
                    u,
                    method: HindsightMethod::LambdaSearch,
                });
            }
        }
        self.conic(d)
    }

    fn lines_ok(&self, u: &[f64], d: &[f64]) -> bool {
        self.limited_lines.iter().all(|&j| {
            let f: f64 = self.ptdf.row(j).iter().enumerate().map(|(i, a)| a * (u[i] + d[i])).sum();
            let (lo, hi) = self.grid.lines[j].limits;
            f >= lo - LINE_TOL && f <= hi + LINE_TOL
        })
    }

    fn lambda_search(&self, d: &[f64]) -> Result<Vec<f64>, HindsightError> {
        let CostMatrix::Diagonal(hq) = &self.cost.quadratic else {
            unreachable!("separable costs are diagonal")
        };
        let h = &self.cost.linear;
        let target = -d.iter().sum::<f64>();
        let lims: Vec<(f64, f64)> = self
            .gens
            .iter()
            .map(|&i| {
                let g = self.grid.generator_at(i).expect("generator bus");
                (g.u_min, g.u_max)
            })
            .collect();
        let (sum_lo, sum_hi) = lims.iter().fold((0.0, 0.0), |(a, b), l| (a + l.0, b + l.1));
        let slack = 1e-12 * (1.0 + target.abs());
        if sum_lo > target + slack || sum_hi < target - slack {
            return Err(HindsightError::Infeasible);
        }
        let dispatch = |lam: f64| -> Vec<f64> {
            self.gens
                .iter()
                .zip(&lims)
                .map(|(&i, &(lo, hi))| ((lam - h[i]) / hq[i]).clamp(lo, hi))
                .collect()
        };
        let total = |lam: f64| dispatch(lam).iter().sum::<f64>();

        // bracket
        let mut lo = -1.0;
        let mut hi = 1.0;
        let mut guard = 0;
        while total(lo) > target && guard < 2000 {
            lo = 2.0 * lo - 1.0;
            guard += 1;
        }
        while total(hi) < target && guard < 2000 {
            hi = 2.0 * hi + 1.0;
            guard += 1;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);

        // exact λ on the free set at the bracketed point
        let mut u_g = dispatch(lam);
        let free: Vec<usize> = (0..self.gens.len())
            .filter(|&k| {
                let (a, b) = lims[k];
                let raw = (lam - h[self.gens[k]]) / hq[self.gens[k]];
                raw > a && raw < b
            })
            .collect();
        if !free.is_empty() {
            let fixed: f64 = (0..self.gens.len()).filter(|k| !free.contains(k)).map(|k| u_g[k]).sum();
            let inv: f64 = free.iter().map(|&k| 1.0 / hq[self.gens[k]]).sum();
            let off: f64 = free.iter().map(|&k| h[self.gens[k]] / hq[self.gens[k]]).sum();
            let lam_exact = (target - fixed + off) / inv;
            let cand: Vec<f64> = (0..self.gens.len())
                .map(|k| {
                    if free.contains(&k) {
                        let i = self.gens[k];
                        ((lam_exact - h[i]) / hq[i]).clamp(lims[k].0, lims[k].1)
                    } else {
                        u_g[k]
                    }
                })
                .collect();
            u_g = cand;
        }
        // absorb round-off on the unit with the most headroom
        let resid = target - u_g.iter().sum::<f64>();
        if resid != 0.0 {
            let k = (0..u_g.len())
                .max_by(|&a, &b| {
                    let room = |k: usize| {
                        if resid > 0.0 {
                            lims[k].1 - u_g[k]
                        } else {
                            u_g[k] - lims[k].0
                        }
                    };
                    room(a).total_cmp(&room(b))
                })
                .expect("at least one unit");
            u_g[k] += resid;
        }
        let mut u = vec![0.0; self.grid.n_bus()];
        for (k, &i) in self.gens.iter().enumerate() {
            u[i] = u_g[k];
        }
        Ok(u)
    }

    fn conic(&self, d: &[f64]) -> Result<HindsightSolution, HindsightError> {
        let n = self.grid.n_bus();
        let mut b = ConicBuilder::new();
        for i in 0..n {
            let (lo, hi) = match self.grid.generator_at(i) {
                Some(g) => (g.u_min, g.u_max),
                None => (0.0, 0.0),
            };
            b.add_var(format!("u[{}]", self.grid.bus_ids[i]), lo, hi, self.cost.linear[i]);
        }
        let mut bal = AffExpr::constant(d.iter().sum());
        for i in 0..n {
            bal = bal.term(i, 1.0);
        }
        b.add_eq(&bal);
        for &j in &self.limited_lines {
            let phi = self.ptdf.row(j);
            let f0: f64 = phi.iter().zip(d).map(|(a, b)| a * b).sum();
            let (lo, hi) = self.grid.lines[j].limits;
            for (bound, sign) in [(hi, 1.0), (lo, -1.0)] {
                if bound.is_finite() {
                    let mut e = AffExpr::constant(sign * (bound - f0));
                    for &i in &self.gens {
                        if phi[i] != 0.0 {
                            e = e.term(i, -sign * phi[i]);
                        }
                    }
                    b.add_nonneg(&[e]);
                }
            }
        }
        if !self.cost.quadratic.is_zero() {
            for frow in self.cost.quadratic.factor() {
                let terms: Vec<(usize, f64)> =
                    frow.into_iter().filter(|&(i, _)| self.grid.generator_at(i).is_some()).collect();
                b.add_square(&terms, 1.0);
            }
        }
        let sol = conic::solve(&b.build(), &self.settings)?;
        match sol.status {
            SolveStatus::Optimal => {
                let u = sol.x[..n].to_vec();
                Ok(HindsightSolution {
                    objective: self.cost.evaluate(&u),
                    u,
                    method: HindsightMethod::Conic,
                })
            }
            SolveStatus::Infeasible => Err(HindsightError::Infeasible),
            s => Err(HindsightError::Solver(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::tests::three_bus_grid;
    use crate::grid::compute_ptdf;

    #[test]
    fn three_bus_equal_incremental_cost() {
        let grid = three_bus_grid([0.2, 0.2]);
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let cost = CostSpec::from_grid(&grid);
        let s = hindsight_opf(&grid, &ptdf, &cost, &[0.0, 0.0, -1.1]).unwrap();
        assert_eq!(s.method, HindsightMethod::LambdaSearch);
        assert!((s.u[0] - 0.8).abs() < 1e-12 && (s.u[1] - 0.3).abs() < 1e-12);
        assert!((s.u.iter().sum::<f64>() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn upper_limit_binds() {
        let grid = three_bus_grid([0.2, 0.2]);
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let cost = CostSpec::from_grid(&grid);
        let s = hindsight_opf(&grid, &ptdf, &cost, &[0.0, 0.0, -1.9]).unwrap();
        // unconstrained split would put 1.2 on unit 1
        assert!((s.u[0] - 0.85).abs() < 1e-12 && (s.u[1] - 1.05).abs() < 1e-12);
    }

    #[test]
    fn conic_path_agrees_with_lambda_search() {
        let grid = three_bus_grid([0.2, 0.1]);
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let cost = CostSpec::from_grid(&grid);
        let solver = HindsightSolver::new(&grid, &ptdf, &cost);
        for demand in [-0.4, -1.1, -1.9] {
            let d = [0.0, 0.0, demand];
            let fast = solver.solve(&d).unwrap();
            let slow = solver.conic(&d).unwrap();
            for i in 0..3 {
                assert!((fast.u[i] - slow.u[i]).abs() < 1e-7, "{demand}: {:?} vs {:?}", fast.u, slow.u);
            }
            assert!(fast.objective <= slow.objective + 1e-9);
        }
    }

    #[test]
    fn zero_demand_zero_dispatch() {
        let mut grid = three_bus_grid([0.2, 0.2]);
        for g in &mut grid.generators {
            g.u_min = 0.0;
        }
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let cost = CostSpec::from_grid(&grid);
        let s = hindsight_opf(&grid, &ptdf, &cost, &[0.0; 3]).unwrap();
        assert!(s.u.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn infeasible_realization_reported() {
        let mut grid = three_bus_grid([0.2, 0.2]);
        grid.generators[1].u_max = 0.1;
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let cost = CostSpec::from_grid(&grid);
        assert!(matches!(
            hindsight_opf(&grid, &ptdf, &cost, &[0.0, 0.0, -1.5]),
            Err(HindsightError::Infeasible)
        ));
    }
}
