//! All-Gaussian, linear-cost instances: the PCE program and the
//! participation-factor program reach the same cost and moments.

mod common;

use ccopf::conic::{self, Settings, SolveStatus};
use ccopf::formulation::build_gaussian_reference;
use ccopf::policy::{solve_policy, Policy};
use common::{random_problem, GridOptions};
use rand::RngExt;

#[test]
fn pce_and_participation_factors_agree() {
    let opts = GridOptions { line_limit: 1e3, quadratic: false };
    let settings = Settings::default();
    for seed in 0..20u64 {
        let n = common::rng(seed).random_range(3..=10);
        let problem = random_problem(500 + seed, n, &opts, true, 0.05);
        let pce = solve_policy(&problem, &settings).unwrap();

        let reference = build_gaussian_reference(&problem).unwrap();
        let sol = conic::solve(&reference.conic, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
        let (u0, u) = reference.policy_coefficients(&sol.x);
        let af = Policy::from_coefficients(&problem, u0, u);

        let cost_gap = (pce.expected_cost - problem.expected_cost(&af.u0, &af.u)).abs();
        assert!(cost_gap <= 1e-6, "seed {seed}: cost gap {cost_gap:e}");
        for (a, b) in pce.policy.u0.iter().zip(&af.u0) {
            assert!((a - b).abs() <= 1e-6, "seed {seed}: mean {a} vs {b}");
        }
        for (a, b) in pce.policy.std_devs().iter().zip(&af.std_devs()) {
            assert!((a - b).abs() <= 1e-6, "seed {seed}: std {a} vs {b}");
        }
    }
}
