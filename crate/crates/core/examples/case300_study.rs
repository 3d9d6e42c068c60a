//! Solves the bundled 300-bus case and compares the policy against
//! per-sample in-hindsight dispatch.
//!
//! ```text
//! cargo run --release --example case300_study -- [samples]
//! ```

use std::time::Instant;

use ccopf::conic::Settings;
use ccopf::formulation::{BetaRule, CcOpfProblem, ChanceSpec};
use ccopf::grid::load_case_file;
use ccopf::policy::solve_policy;
use ccopf::uncertainty::{assemble_demand, load_uncertainty_spec_file};
use ccopf::validation::{audit_with_hindsight, compare_std};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let samples: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let grid = load_case_file(format!("{data}/case300.json"))?;
    let spec = load_uncertainty_spec_file(format!("{data}/unc_case300.json"))?;
    let demand = assemble_demand(&grid, spec.sources(&grid)?)?;
    let problem = CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(0.025, BetaRule::DistributionallyRobust))?;

    let t = Instant::now();
    let solved = solve_policy(&problem, &Settings { tol: 1e-6, ..Settings::default() })?;
    println!(
        "solved in {:.2?}: {} iterations, expected cost {:.6}",
        t.elapsed(),
        solved.solution.iterations,
        solved.expected_cost
    );

    let t = Instant::now();
    let report = audit_with_hindsight(&solved.policy, &problem, samples, 1)?;
    println!("audited {samples} samples in {:.2?}", t.elapsed());
    println!("min chance margin {:+.4}", report.min_margin());
    if let Some(h) = &report.hindsight {
        println!(
            "hindsight: {} solved, {} outside limits, max excess {:.2e}",
            h.solved, h.policy_outside_limits, h.max_objective_excess
        );
    }
    if let Some(c) = compare_std(&report) {
        println!(
            "|σ_ccopf|₁ = {:.4}, |σ_hopf|₁ = {:.4}, gap {:+.3e} ({:.3e} %), max |Δσ| {:.4} at bus {}",
            c.norm1_ccopf,
            c.norm1_hopf,
            c.norm1_gap,
            100.0 * c.relative_gap,
            c.inf_norm,
            c.argmax_bus
        );
    }
    Ok(())
}
