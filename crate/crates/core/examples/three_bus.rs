//! The two three-bus cases: optimal expansion coefficients, the policy in
//! demand coordinates and the exact probability of meeting unit 1's limit.
//!
//! ```text
//! cargo run --example three_bus
//! ```

use ccopf::conic::Settings;
use ccopf::formulation::{BetaRule, CcOpfProblem, ChanceSpec};
use ccopf::grid::load_case_file;
use ccopf::policy::solve_policy;
use ccopf::uncertainty::{assemble_demand, load_uncertainty_spec_file};

fn problem(case: &str, unc: &str, eps: f64, rule: BetaRule) -> Result<CcOpfProblem, Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let grid = load_case_file(format!("{data}/{case}"))?;
    let sources = load_uncertainty_spec_file(format!("{data}/{unc}"))?.sources(&grid)?;
    let demand = assemble_demand(&grid, sources)?;
    Ok(CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(eps, rule))?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("Beta(4,2) load", "case3_beta.json", "unc_beta.json", BetaRule::DistributionallyRobust),
        ("sinusoidal load", "case3_sin.json", "unc_sin.json", BetaRule::GaussianExact),
    ];
    for (label, case, unc, rule) in cases {
        println!("{label}");
        for eps in [0.05, 0.10] {
            let p = problem(case, unc, eps, rule)?;
            let solved = solve_policy(&p, &Settings::default())?;
            let pol = &solved.policy;
            let u1 = pol.column(1);
            let coords = pol.in_demand_coordinates()?;
            let u_max = p.grid.generators.iter().find(|g| g.bus == 0).map_or(f64::INFINITY, |g| g.u_max);
            println!(
                "  eps {eps:.2}: u0 = [{:.4}, {:.4}]  u1 = [{:.4}, {:.4}]  E[J] = {:.6}",
                pol.u0[0], pol.u0[1], u1[0], u1[1], solved.expected_cost
            );
            println!(
                "             u(d) = [{:.4}, {:.4}] + [{:.4}, {:.4}] d   P(u1 <= {u_max}) = {:.4}",
                coords.intercept[0],
                coords.intercept[1],
                coords.slope[0],
                coords.slope[1],
                pol.violation_probability_closed_form(0, u_max)?
            );
        }
    }
    Ok(())
}
