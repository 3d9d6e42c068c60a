//! Power transfer distribution factors for the bundled cases, and the
//! MATPOWER importer.
//!
//! ```text
//! cargo run --example ptdf
//! ```

use ccopf::grid::{compute_ptdf, load_case_file, load_matpower_file, MatpowerOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let grid = load_case_file(format!("{data}/case3_beta.json"))?;
    let ptdf = compute_ptdf(&grid, grid.slack_bus)?;
    println!("three-bus PTDF (slack bus {}):", grid.bus_ids[grid.slack_bus]);
    for (j, line) in grid.lines.iter().enumerate() {
        println!("  {}-{}: {:?}", grid.bus_ids[line.from], grid.bus_ids[line.to], ptdf.row(j));
    }
    // unit 1 covers the whole load at bus 3
    let p = [1.2, 0.0, -1.2];
    println!("  flows for p = {p:?}: {:?}", ptdf.apply(&p));

    // the stock file has one series capacitor (negative reactance)
    let strict = load_matpower_file(format!("{data}/case300.m"), &MatpowerOptions::default());
    println!("case300.m as published: {}", strict.err().map_or("accepted".into(), |e| e.to_string()));
    let opts = MatpowerOptions { flip_negative_reactance: true };
    let m = load_matpower_file(format!("{data}/case300.m"), &opts)?;
    let j = load_case_file(format!("{data}/case300.json"))?;
    println!(
        "case300.m with flipped reactance: {} buses, {} lines, {} units (bundled JSON: {} / {} / {})",
        m.n_bus(),
        m.n_line(),
        m.n_gen(),
        j.n_bus(),
        j.n_line(),
        j.n_gen()
    );
    let t = std::time::Instant::now();
    let big = compute_ptdf(&j, j.slack_bus)?;
    println!("case300 PTDF: {}×{} in {:.2?}", big.n_line, big.n_bus, t.elapsed());
    Ok(())
}
