//! Samples the sinusoidal-load policy, reports how often each chance
//! constraint holds and draws a text histogram of unit 1's output.
//!
//! ```text
//! cargo run --release --example monte_carlo -- [samples] [seed]
//! ```

use ccopf::conic::Settings;
use ccopf::formulation::{BetaRule, CcOpfProblem, ChanceSpec};
use ccopf::grid::load_case_file;
use ccopf::policy::solve_policy;
use ccopf::uncertainty::{assemble_demand, load_uncertainty_spec_file};
use ccopf::validation::monte_carlo_audit;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let samples: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200_000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let grid = load_case_file(format!("{data}/case3_sin.json"))?;
    let demand = assemble_demand(&grid, load_uncertainty_spec_file(format!("{data}/unc_sin.json"))?.sources(&grid)?)?;
    let problem = CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(0.05, BetaRule::GaussianExact))?;
    let policy = solve_policy(&problem, &Settings::default())?.policy;

    let report = monte_carlo_audit(&policy, &problem, samples, seed)?;
    println!("{samples} samples, seed {seed}, max balance residual {:.1e}", report.max_balance_residual);
    for c in &report.constraints {
        let exact = c.closed_form.map_or(String::new(), |p| format!(", exact {p:.4}"));
        println!("  {:?} {} <= {:+.3}: frequency {:.4} (need {:.2}{exact})", c.kind, c.element, c.bound, c.frequency, 1.0 - c.epsilon);
    }
    if let Some(h) = report.histograms.iter().find(|h| h.bus == 1) {
        let hist = &h.histogram;
        // regroup the fine bins into 20 rows
        let group = (hist.counts.len() / 20).max(1);
        let rows: Vec<u64> = hist.counts.chunks(group).map(|c| c.iter().sum()).collect();
        let top = *rows.iter().max().unwrap_or(&1) as f64;
        let width = hist.width() * group as f64;
        println!("unit at bus 1:");
        for (k, &c) in rows.iter().enumerate() {
            let bar = "#".repeat((50.0 * c as f64 / top).round() as usize);
            println!("  {:6.3} {bar}", hist.lo + (k as f64 + 0.5) * width);
        }
    }
    Ok(())
}
