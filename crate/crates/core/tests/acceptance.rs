//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! verdict. Run with `--nocapture` to see the table when everything passes.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use ccopf::conic::{self, Settings, SolveStatus};
use ccopf::formulation::{build_gaussian_reference, BetaRule, CcOpfProblem, ChanceSpec};
use ccopf::grid::compute_ptdf;
use ccopf::policy::{solve_policy, Policy, SolvedPolicy};
use ccopf::stochastics::{build_germ, CustomDensity, GermKind};
use ccopf::uncertainty::DemandPce;
use ccopf::validation::{audit_with_hindsight, hindsight_opf, monte_carlo_audit, ConstraintKind};
use common::polys::{by_quadrature, hermite, jacobi, laguerre, legendre, off_diagonal};
use common::{angle_flows, bundled, random_grid, random_problem, GridOptions};
use rand::RngExt;

const TABLE_TOL: f64 = 1e-3;
const MC_TOL: f64 = 3e-3;
const MC_SAMPLES: usize = 1_000_000;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report(Vec<Outcome>);

impl Report {
    fn add(&mut self, id: &'static str, pass: bool, detail: String) {
        println!("[{}] {id:<4} {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push(Outcome { id, pass, detail });
    }

    fn failures(&self) -> Vec<String> {
        self.0.iter().filter(|o| !o.pass).map(|o| format!("{} ({})", o.id, o.detail)).collect()
    }
}

fn beta_case(eps: f64) -> CcOpfProblem {
    bundled("case3_beta.json", "unc_beta.json", eps, BetaRule::DistributionallyRobust)
}

fn sin_case(eps: f64) -> CcOpfProblem {
    bundled("case3_sin.json", "unc_sin.json", eps, BetaRule::GaussianExact)
}

fn timed_solve(build: impl Fn() -> CcOpfProblem, settings: &Settings) -> (CcOpfProblem, SolvedPolicy, f64) {
    let start = Instant::now();
    let problem = build();
    let solved = solve_policy(&problem, settings).unwrap();
    (problem, solved, start.elapsed().as_secs_f64())
}

/// Worst deviation of `(u₀, u₁)` for the two units from a table row.
fn table_error(p: &Policy, u0: [f64; 2], u1: [f64; 2]) -> f64 {
    let c = p.column(1);
    (0..2).fold(0.0f64, |m, k| m.max((p.u0[k] - u0[k]).abs()).max((c[k] - u1[k]).abs()))
}

fn table(report: &mut Report, id: &'static str, name: &str, build: fn(f64) -> CcOpfProblem, rows: [(f64, [f64; 2], [f64; 2]); 2]) {
    for (eps, u0, u1) in rows {
        let (_, solved, secs) = timed_solve(|| build(eps), &Settings::default());
        let err = table_error(&solved.policy, u0, u1);
        report.add(
            id,
            err <= TABLE_TOL && secs < 1.0,
            format!("{name} eps={eps}: max coefficient error {err:.2e} (tol {TABLE_TOL:.0e}), {secs:.3} s"),
        );
    }
}

fn criterion_3(report: &mut Report) {
    let cases: [(&str, fn(f64) -> CcOpfProblem, f64, f64, [f64; 2], f64); 4] = [
        ("beta", beta_case, 0.05, 0.6513, [0.1270, 0.8730], TABLE_TOL),
        // printed with two decimals only; half a unit in the last place
        ("beta", beta_case, 0.10, 0.58, [0.19, 0.81], 5e-3),
        ("sinusoidal", sin_case, 0.05, 0.5126, [0.1919, 0.8081], TABLE_TOL),
        ("sinusoidal", sin_case, 0.10, 0.4511, [0.2376, 0.7624], TABLE_TOL),
    ];
    for (name, build, eps, intercept, slope, tol) in cases {
        let policy = solve_policy(&build(eps), &Settings::default()).unwrap().policy;
        let coords = policy.in_demand_coordinates().unwrap();
        // u = [a, −a] − s·d
        let err = (coords.intercept[0] - intercept)
            .abs()
            .max((coords.intercept[1] + intercept).abs())
            .max((coords.slope[0] + slope[0]).abs())
            .max((coords.slope[1] + slope[1]).abs());
        report.add(
            "3",
            err <= tol,
            format!(
                "{name} eps={eps}: u(d) = [{:.4}, {:.4}] + [{:.4}, {:.4}] d, max error {err:.2e} (tol {tol:.0e})",
                coords.intercept[0], coords.intercept[1], coords.slope[0], coords.slope[1]
            ),
        );
    }
}

fn criterion_4(report: &mut Report) {
    let cases: [(&str, fn(f64) -> CcOpfProblem, f64, f64); 4] = [
        ("beta", beta_case, 0.05, 1.0),
        ("beta", beta_case, 0.10, 1.0),
        ("sinusoidal", sin_case, 0.05, 0.9511),
        ("sinusoidal", sin_case, 0.10, 0.9105),
    ];
    for (name, build, eps, target) in cases {
        let problem = build(eps);
        let policy = solve_policy(&problem, &Settings::default()).unwrap().policy;
        let gen = problem.grid.generators.iter().find(|g| g.bus == 0).unwrap();
        let closed = policy.violation_probability_closed_form(0, gen.u_max).unwrap();
        let audit = monte_carlo_audit(&policy, &problem, MC_SAMPLES, 7).unwrap();
        let freq = audit
            .constraints
            .iter()
            .find(|c| c.kind == ConstraintKind::GenUpper && c.element == problem.grid.bus_ids[0])
            .unwrap()
            .frequency;
        let exact_ok = if target == 1.0 { closed == 1.0 } else { (closed - target).abs() <= TABLE_TOL };
        report.add(
            "4",
            exact_ok,
            format!("{name} eps={eps}: closed form P(u1 <= {}) = {closed:.4}, target {target}", gen.u_max),
        );
        report.add(
            "4",
            (freq - target).abs() <= MC_TOL,
            format!("{name} eps={eps}: Monte Carlo frequency {freq:.4} over {MC_SAMPLES} samples, target {target} (tol {MC_TOL})"),
        );
    }
}

fn balance(report: &mut Report, label: String, problem: &CcOpfProblem, tol: f64, seed: u64) {
    let solved = solve_policy(problem, &Settings { tol, ..Settings::default() }).unwrap();
    let r = monte_carlo_audit(&solved.policy, problem, 10_000, seed).unwrap().max_balance_residual;
    report.add("5", r <= 1e-9, format!("{label}: max balance residual {r:.2e} over 10000 samples"));
}

fn criterion_5(report: &mut Report) {
    for eps in [0.05, 0.10] {
        balance(report, format!("beta eps={eps}"), &beta_case(eps), 1e-8, 1);
        balance(report, format!("sinusoidal eps={eps}"), &sin_case(eps), 1e-8, 1);
    }
    let opts = GridOptions { line_limit: 5.0, quadratic: true };
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let n = common::rng(seed).random_range(5..=30);
        let problem = random_problem(seed, n, &opts, false, 0.05);
        let solved = solve_policy(&problem, &Settings::default()).unwrap();
        let r = monte_carlo_audit(&solved.policy, &problem, 10_000, seed).unwrap().max_balance_residual;
        worst = worst.max(r);
    }
    report.add("5", worst <= 1e-9, format!("20 random 5-30 bus cases: max balance residual {worst:.2e}"));
}

fn criterion_6(report: &mut Report) {
    let opts = GridOptions { line_limit: 1e3, quadratic: false };
    let settings = Settings::default();
    let (mut cost, mut moments) = (0.0f64, 0.0f64);
    for seed in 0..20u64 {
        let n = common::rng(seed).random_range(3..=10);
        let problem = random_problem(500 + seed, n, &opts, true, 0.05);
        let pce = solve_policy(&problem, &settings).unwrap();
        let reference = build_gaussian_reference(&problem).unwrap();
        let sol = conic::solve(&reference.conic, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let (u0, u) = reference.policy_coefficients(&sol.x);
        let af = Policy::from_coefficients(&problem, u0, u);
        cost = cost.max((pce.expected_cost - problem.expected_cost(&af.u0, &af.u)).abs());
        for (a, b) in pce.policy.u0.iter().zip(&af.u0).chain(pce.policy.std_devs().iter().zip(&af.std_devs())) {
            moments = moments.max((a - b).abs());
        }
    }
    report.add(
        "6",
        cost <= 1e-6 && moments <= 1e-6,
        format!("20 Gaussian linear-cost cases: cost gap {cost:.2e}, moment gap {moments:.2e} (tol 1e-6)"),
    );
}

fn criterion_7(report: &mut Report) {
    let families: Vec<(&str, GermKind, Box<dyn Fn(f64) -> Vec<f64>>)> = vec![
        ("Hermite", GermKind::GaussianStandard, Box::new(hermite)),
        ("Jacobi(1,3)/Beta(4,2)", GermKind::Beta { a: 4.0, b: 2.0 }, Box::new(|x| jacobi(x, 1.0, 3.0))),
        ("Legendre", GermKind::Uniform01, Box::new(legendre)),
        ("Laguerre", GermKind::Gamma { shape: 2.5 }, Box::new(|x| laguerre(x, 1.5))),
        ("sinusoidal", GermKind::Custom(CustomDensity::Sinusoidal), Box::new(|x| vec![1.0, x - 0.5])),
    ];
    for (name, kind, polys) in families {
        let c = build_germ(kind).unwrap();
        let off = off_diagonal(by_quadrature(&c), polys);
        report.add("7", off <= 1e-8, format!("{name}: largest off-diagonal Gram entry {off:.2e}"));
    }
    let beta = build_germ(GermKind::Beta { a: 4.0, b: 2.0 }).unwrap().gamma1;
    let sin = build_germ(GermKind::Custom(CustomDensity::Sinusoidal)).unwrap().gamma1;
    let (e1, e2) = ((beta - 8.0 / 7.0).abs(), (sin - (0.25 - 2.0 / (PI * PI))).abs());
    report.add(
        "7",
        e1 <= 1e-10 && e2 <= 1e-10,
        format!("gamma1: Beta(4,2) {beta:.12} (err {e1:.1e}), sinusoidal {sin:.12} (err {e2:.1e})"),
    );
}

fn criterion_8(report: &mut Report) {
    let problem = bundled("case300.json", "unc_case300.json", 0.025, BetaRule::DistributionallyRobust);
    let sources = problem.demand.l();
    let start = Instant::now();
    let solved = solve_policy(&problem, &Settings { tol: 1e-6, ..Settings::default() });
    let secs = start.elapsed().as_secs_f64();
    let solved = match solved {
        Ok(s) => s,
        Err(e) => {
            report.add("8a", false, format!("case300 solve failed: {e}"));
            return;
        }
    };
    report.add(
        "8a",
        solved.solution.status == SolveStatus::Optimal && secs < 10.0,
        format!("case300 ({sources} sources, eps=0.025): {:?} in {secs:.2} s", solved.solution.status),
    );
    balance_of(report, &solved.policy, &problem);

    let audit = audit_with_hindsight(&solved.policy, &problem, 20_000, 1).unwrap();
    let h = audit.hindsight.as_ref().unwrap();
    report.add(
        "8b",
        h.solved + h.infeasible == 20_000 && h.max_objective_excess <= 1e-8,
        format!(
            "hOPF: {} solved, {} infeasible, {} compared, max(J_hopf - J_policy) = {:.3e}",
            h.solved, h.infeasible, h.compared, h.max_objective_excess
        ),
    );
    let cmp = audit.comparison.as_ref().unwrap();
    report.add(
        "8c",
        cmp.norm1_gap >= -1e-6 && cmp.relative_gap.abs() <= 0.05,
        format!(
            "|sigma_ccopf|_1 = {:.6}, |sigma_hopf|_1 = {:.6}, gap {:+.3e}, relative {:.4}, inf-norm {:.4} at bus {}",
            cmp.norm1_ccopf, cmp.norm1_hopf, cmp.norm1_gap, cmp.relative_gap, cmp.inf_norm, cmp.argmax_bus
        ),
    );
    let margin = audit.min_margin();
    report.add(
        "8d",
        margin >= 0.0,
        format!("{} audited chance constraints, min(frequency - (1 - eps)) = {margin:+.4}", audit.constraints.len()),
    );
}

/// The case300 run also counts toward the viability criterion.
fn balance_of(report: &mut Report, policy: &Policy, problem: &CcOpfProblem) {
    let r = monte_carlo_audit(policy, problem, 10_000, 1).unwrap().max_balance_residual;
    report.add("5", r <= 1e-9, format!("case300: max balance residual {r:.2e} over 10000 samples"));
}

fn criterion_9(report: &mut Report) {
    let opts = GridOptions { line_limit: f64::INFINITY, quadratic: false };
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = common::rng(1000 + seed);
        let n = rng.random_range(2..=30);
        let grid = random_grid(seed, n, &opts);
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        p.iter_mut().for_each(|v| *v -= mean);
        for (a, b) in ptdf.apply(&p).iter().zip(angle_flows(&grid, &p)) {
            worst = worst.max((a - b).abs());
        }
    }
    report.add("9", worst <= 1e-8, format!("50 random networks: max |phi p - angle flows| {worst:.2e}"));
}

fn criterion_10(report: &mut Report) {
    let opts = GridOptions { line_limit: 1e3, quadratic: true };
    let (mut mean_err, mut first_order) = (0.0f64, 0.0f64);
    let mut grids = vec![beta_case(0.05).grid];
    for seed in 0..10u64 {
        let n = common::rng(seed).random_range(3..=15);
        grids.push(random_grid(900 + seed, n, &opts));
    }
    for grid in grids {
        let problem = CcOpfProblem::with_grid_costs(
            grid.clone(),
            DemandPce::deterministic(&grid),
            ChanceSpec::new(0.05, BetaRule::DistributionallyRobust),
        )
        .unwrap();
        let solved = solve_policy(&problem, &Settings::default()).unwrap();
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        let det = hindsight_opf(&grid, &ptdf, &problem.cost, &grid.nominal_demand).unwrap();
        for (a, b) in solved.policy.u0.iter().zip(&det.u) {
            mean_err = mean_err.max((a - b).abs());
        }
        first_order = solved.policy.u.iter().fold(first_order, |m, v| m.max(v.abs()));
    }
    report.add(
        "10",
        mean_err <= 1e-8 && first_order <= 1e-10,
        format!("D = 0 on 11 grids: max |u0 - u_opf| {mean_err:.2e}, max |u_l| {first_order:.2e}"),
    );
}

#[test]
fn acceptance() {
    let mut report = Report::default();
    table(
        &mut report,
        "1",
        "beta",
        beta_case,
        [(0.05, [0.7910, 0.3090], [-0.0127, -0.0873]), (0.10, [0.7890, 0.3110], [-0.0190, -0.0810])],
    );
    table(
        &mut report,
        "2",
        "sinusoidal",
        sin_case,
        [(0.05, [0.7813, 0.6187], [-0.1919, -0.8081]), (0.10, [0.7837, 0.6163], [-0.2376, -0.7624])],
    );
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);
    criterion_10(&mut report);

    let failed = report.failures();
    let total = report.0.len();
    println!("{} of {total} checks passed", total - failed.len());
    assert!(failed.is_empty(), "failed checks:\n  {}", failed.join("\n  "));
}
