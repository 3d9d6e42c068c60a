//! With Gaussian loads and linear costs, per-source responses buy nothing
//! over classical participation factors: both programs reach the same cost
//! and the same generator moments.
//!
//! ```text
//! cargo run --example gaussian_reference
//! ```

use ccopf::conic::{self, Settings};
use ccopf::formulation::{build_gaussian_reference, BetaRule, CcOpfProblem, ChanceSpec};
use ccopf::grid::{Generator, Grid, Line};
use ccopf::policy::{solve_policy, Policy};
use ccopf::uncertainty::{assemble_demand, Distribution, UncertaintySource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let line = |from, to, x| Line { from, to, reactance: x, limits: (-50.0, 50.0) };
    let unit = |bus, u_max, h| Generator { bus, u_min: 0.0, u_max, cost_linear: h, cost_quadratic: 0.0 };
    let grid = Grid::new(
        "ring5",
        vec![1, 2, 3, 4, 5],
        vec![0.0, -0.8, -1.1, -0.6, 0.0],
        vec![line(0, 1, 0.2), line(1, 2, 0.3), line(2, 3, 0.25), line(3, 4, 0.2), line(4, 0, 0.4)],
        vec![unit(0, 1.5, 2.0), unit(4, 2.0, 3.0), unit(2, 1.0, 4.5)],
        None,
    )?;
    let sources = [(1, -0.8, 0.05), (2, -1.1, 0.08), (3, -0.6, 0.04)]
        .iter()
        .map(|&(bus, mean, std)| UncertaintySource::at_bus(&grid, format!("d{}", bus + 1), bus, Distribution::Gaussian { mean, std }))
        .collect::<Result<Vec<_>, _>>()?;
    let demand = assemble_demand(&grid, sources)?;
    let problem = CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(0.05, BetaRule::GaussianExact))?;

    let settings = Settings::default();
    let pce = solve_policy(&problem, &settings)?;
    let reference = build_gaussian_reference(&problem)?;
    let sol = conic::solve(&reference.conic, &settings)?;
    let (u0, u) = reference.policy_coefficients(&sol.x);
    let af = Policy::from_coefficients(&problem, u0, u);

    println!("expected cost: expansion {:.8}, participation factors {:.8}", pce.expected_cost, problem.expected_cost(&af.u0, &af.u));
    println!("{:<5} {:>10} {:>10} {:>10} {:>10}", "bus", "mean", "mean(af)", "std", "std(af)");
    let (s1, s2) = (pce.policy.std_devs(), af.std_devs());
    for i in problem.grid.generator_buses() {
        println!(
            "{:<5} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            problem.grid.bus_ids[i], pce.policy.u0[i], af.u0[i], s1[i], s2[i]
        );
    }
    Ok(())
}
