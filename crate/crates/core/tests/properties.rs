mod common;

use std::sync::OnceLock;

use ccopf::conic::Settings;
use ccopf::formulation::{beta_factor, BetaRule, CcOpfProblem};
use ccopf::grid::compute_ptdf;
use ccopf::policy::{solve_policy, Policy};
use ccopf::stochastics::{build_germ, sample_germ, tensorize, GermKind};
use ccopf::validation::{Histogram, Moments};
use common::{angle_flows, random_grid, random_problem, GridOptions};
use proptest::prelude::*;

fn solved() -> &'static (CcOpfProblem, Policy) {
    static CELL: OnceLock<(CcOpfProblem, Policy)> = OnceLock::new();
    CELL.get_or_init(|| {
        let opts = GridOptions { line_limit: 5.0, quadratic: true };
        let problem = random_problem(3, 12, &opts, false, 0.05);
        let policy = solve_policy(&problem, &Settings::default()).unwrap().policy;
        (problem, policy)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flows_ignore_uniform_shifts(seed in 0u64..1000, n in 2usize..20, shift in -5.0f64..5.0,
                                   raw in prop::collection::vec(-2.0f64..2.0, 20)) {
        let opts = GridOptions { line_limit: f64::INFINITY, quadratic: false };
        let grid = random_grid(seed, n, &opts);
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let p = &raw[..n];
        let shifted: Vec<f64> = p.iter().map(|v| v + shift).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = p.iter().map(|v| v - mean).collect();
        let reference = angle_flows(&grid, &centered);
        for ((a, b), c) in ptdf.flows(p).iter().zip(ptdf.flows(&shifted)).zip(reference) {
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((a - c).abs() < 1e-8);
        }
    }

    #[test]
    fn germ_map_round_trips(a in 0.5f64..10.0, b in 0.5f64..10.0, shape in 0.5f64..10.0,
                            x in prop::collection::vec(0.0f64..1.0, 4)) {
        let basis = tensorize(vec![
            build_germ(GermKind::GaussianStandard).unwrap(),
            build_germ(GermKind::Beta { a, b }).unwrap(),
            build_germ(GermKind::Gamma { shape }).unwrap(),
            build_germ(GermKind::Uniform01).unwrap(),
        ]).unwrap();
        let xi = vec![4.0 * x[0] - 2.0, x[1], 5.0 * x[2], x[3]];
        let back = basis.xi_from_psi(&basis.psi(&xi));
        for (u, v) in xi.iter().zip(&back) {
            prop_assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn germ_samples_stay_in_support(a in 0.5f64..10.0, b in 0.5f64..10.0, seed in 0u64..1000) {
        let basis = tensorize(vec![
            build_germ(GermKind::Beta { a, b }).unwrap(),
            build_germ(GermKind::Gamma { shape: a }).unwrap(),
        ]).unwrap();
        let s = sample_germ(&basis, 256, seed).unwrap();
        prop_assert_eq!(s.count(), 256);
        for row in s.rows() {
            prop_assert!((0.0..=1.0).contains(&row[0]));
            prop_assert!(row[1] >= 0.0);
        }
        let again = sample_germ(&basis, 256, seed).unwrap();
        prop_assert!(s.rows().zip(again.rows()).all(|(p, q)| p == q));
    }

    #[test]
    fn moment_merge_matches_single_pass(data in prop::collection::vec(-100.0f64..100.0, 2..200),
                                        cut in 0usize..200) {
        let cut = cut.min(data.len());
        let mut whole = Moments::new(1);
        data.iter().for_each(|v| whole.push(&[*v]));
        let (mut left, mut right) = (Moments::new(1), Moments::new(1));
        data[..cut].iter().for_each(|v| left.push(&[*v]));
        data[cut..].iter().for_each(|v| right.push(&[*v]));
        left.merge(&right);
        prop_assert_eq!(left.count, whole.count);
        prop_assert!((left.mean[0] - whole.mean[0]).abs() < 1e-9);
        prop_assert!((left.std()[0] - whole.std()[0]).abs() < 1e-9);
    }

    #[test]
    fn histogram_keeps_every_sample(data in prop::collection::vec(-3.0f64..3.0, 0..300), bins in 1usize..50) {
        let mut h = Histogram::new(-1.0, 1.0, bins);
        data.iter().for_each(|&v| h.push(v));
        prop_assert_eq!(h.total(), data.len() as u64);
        prop_assert_eq!(h.underflow, data.iter().filter(|&&v| v < -1.0).count() as u64);
    }

    #[test]
    fn robust_factor_dominates_gaussian(eps in 0.001f64..0.5, d in 0.0001f64..0.1) {
        let dr = beta_factor(BetaRule::DistributionallyRobust, eps).unwrap();
        let ga = beta_factor(BetaRule::GaussianExact, eps).unwrap();
        prop_assert!(dr >= ga);
        let looser = (eps + d).min(0.5);
        prop_assert!(beta_factor(BetaRule::DistributionallyRobust, looser).unwrap() <= dr);
        prop_assert!(beta_factor(BetaRule::GaussianExact, looser).unwrap() <= ga);
    }

    #[test]
    fn solved_policy_balances_any_germ(x in prop::collection::vec(-3.0f64..3.0, 4)) {
        let (_, policy) = solved();
        let xi = &x[..policy.l()];
        // viability is algebraic: it holds even off the support
        prop_assert!(policy.balance_residual(xi) < 1e-9);
    }

    #[test]
    fn germ_recovery_inverts_the_demand_map(x in prop::collection::vec(0.0f64..1.0, 4)) {
        let (_, policy) = solved();
        let xi = &x[..policy.l()];
        let d = policy.demand(xi);
        let rec = policy.recover_germ(&d).unwrap();
        for (a, b) in rec.xi.iter().zip(xi) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        let coords = policy.in_demand_coordinates().unwrap();
        let u = policy.evaluate(xi);
        let l = policy.l();
        for i in 0..policy.n() {
            let v = coords.intercept[i]
                + (0..l).map(|r| coords.slope[i * l + r] * d[coords.buses[r]]).sum::<f64>();
            prop_assert!((v - u[i]).abs() < 1e-9);
        }
    }
}
