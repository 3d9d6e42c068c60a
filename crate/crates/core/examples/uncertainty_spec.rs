//! Reads an uncertainty file and prints the demand expansion
//! `d = d₀ + Dψ` it produces.
//!
//! ```text
//! cargo run --example uncertainty_spec -- [case.json] [uncertainty.json]
//! ```

use ccopf::grid::load_case_file;
use ccopf::uncertainty::{assemble_demand, load_uncertainty_spec_file};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let mut args = std::env::args().skip(1);
    let case = args.next().unwrap_or(format!("{data}/case300.json"));
    let unc = args.next().unwrap_or(format!("{data}/unc_case300.json"));
    let grid = load_case_file(&case)?;
    let spec = load_uncertainty_spec_file(&unc)?;
    if let Some(notes) = &spec.notes {
        println!("{notes}");
    }
    let demand = assemble_demand(&grid, spec.sources(&grid)?)?;
    println!("{} buses, {} sources, all Gaussian: {}", grid.n_bus(), demand.l(), demand.all_gaussian());
    let sums = demand.column_sums();
    println!("{:<8} {:>8} {:>12} {:>10} {:>12}", "source", "bus", "mean", "std", "1ᵀd_l");
    for (k, s) in demand.summaries(&grid).iter().enumerate() {
        let bus = s.bus.map_or("pattern".into(), |b| b.to_string());
        println!("{:<8} {bus:>8} {:>12.4} {:>10.4} {:>12.4}", s.id, s.mean, s.std, sums[k + 1]);
    }
    println!("total expected demand {:.4}", sums[0]);
    Ok(())
}
