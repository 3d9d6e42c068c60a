//! Online use of a policy: observe the demand, recover the germ, dispatch.
//!
//! ```text
//! cargo run --example germ_recovery
//! ```

use ccopf::conic::Settings;
use ccopf::formulation::{BetaRule, CcOpfProblem, ChanceSpec};
use ccopf::grid::load_case_file;
use ccopf::policy::solve_policy;
use ccopf::uncertainty::{assemble_demand, load_uncertainty_spec_file};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let grid = load_case_file(format!("{data}/case3_beta.json"))?;
    let demand = assemble_demand(&grid, load_uncertainty_spec_file(format!("{data}/unc_beta.json"))?.sources(&grid)?)?;
    let problem = CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(0.05, BetaRule::DistributionallyRobust))?;
    let policy = solve_policy(&problem, &Settings::default())?.policy;
    let coords = policy.in_demand_coordinates()?;

    for load in [-1.5, -1.35, -1.2, -1.05, -0.9, -1.6] {
        let d = [0.0, 0.0, load];
        let rec = policy.recover_germ(&d)?;
        let u = policy.evaluate(&rec.xi);
        let direct: Vec<f64> = (0..2).map(|i| coords.intercept[i] + coords.slope[i] * load).collect();
        let note = if rec.out_of_support.is_empty() { "" } else { "  (outside the modeled support)" };
        println!(
            "d3 = {load:+.2}: xi = {:.4}, u = [{:.4}, {:.4}], from demand coordinates [{:.4}, {:.4}], balance {:+.1e}{note}",
            rec.xi[0],
            u[0],
            u[1],
            direct[0],
            direct[1],
            policy.balance_residual(&rec.xi)
        );
    }
    Ok(())
}
