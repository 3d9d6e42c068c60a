//! The second-order cone solver on its own: a small portfolio-style
//! problem with a quadratic objective, a budget and a risk cone.
//!
//! ```text
//! cargo run --example conic_solver
//! ```

use ccopf::conic::{solve, AffExpr, ConicBuilder, Settings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // minimize ½·0.1‖w‖² − μᵀw  s.t. 1ᵀw = 1, w ≥ 0, ‖Lᵀw‖ ≤ 0.15
    let mu = [0.08, 0.12, 0.15, 0.06];
    let l = [[0.10, 0.0, 0.0, 0.0], [0.02, 0.18, 0.0, 0.0], [0.04, 0.05, 0.25, 0.0], [0.0, 0.01, 0.0, 0.05]];
    let mut b = ConicBuilder::new();
    let w: Vec<usize> = mu.iter().enumerate().map(|(i, m)| b.add_var(format!("w{i}"), 0.0, f64::INFINITY, -m)).collect();
    for &v in &w {
        b.add_square(&[(v, 1.0)], 0.1);
    }
    b.add_eq(&w.iter().fold(AffExpr::constant(-1.0), |e, &v| e.term(v, 1.0)));
    let mut cone = vec![AffExpr::constant(0.15)];
    for j in 0..4 {
        cone.push((0..4).fold(AffExpr::constant(0.0), |e, i| e.term(w[i], l[i][j])));
    }
    b.add_soc(&cone);
    let sol = solve(&b.build(), &Settings { verbose: false, ..Settings::default() })?;
    println!("status {:?} after {} iterations in {:.2e} s", sol.status, sol.iterations, sol.seconds);
    println!("weights {:?}", sol.x.iter().map(|v| (v * 1e4).round() / 1e4 + 0.0).collect::<Vec<_>>());
    println!("objective {:.8}, residuals {:?}", sol.objective, sol.kkt_residuals);
    println!("risk-cone multiplier {:.6}", sol.z[0]);
    Ok(())
}
