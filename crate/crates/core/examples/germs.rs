//! Germ families, their degree-one basis polynomials and squared norms,
//! checked against Gauss quadrature.
//!
//! ```text
//! cargo run --example germs
//! ```

use ccopf::stochastics::{build_germ, tensorize, CustomDensity, GermKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kinds = [
        ("Gaussian", GermKind::GaussianStandard),
        ("Uniform(0,1)", GermKind::Uniform01),
        ("Beta(4,2)", GermKind::Beta { a: 4.0, b: 2.0 }),
        ("Gamma(3)", GermKind::Gamma { shape: 3.0 }),
        ("sinusoidal", GermKind::Custom(CustomDensity::Sinusoidal)),
    ];
    println!("{:<14} {:>22} {:>12} {:>12}", "germ", "psi1(xi)", "gamma1", "quadrature");
    let mut comps = Vec::new();
    for (name, kind) in kinds {
        let c = build_germ(kind)?;
        let rule = c.quadrature(16);
        let q = rule.integrate(|x| c.psi1(x).powi(2));
        println!(
            "{name:<14} {:>22} {:>12.8} {:>12.8}",
            format!("{:+.4} {:+.4} xi", c.psi_offset, c.psi_slope),
            c.gamma1,
            q
        );
        comps.push(c);
    }
    let basis = tensorize(comps)?;
    let g = basis.gram_matrix();
    let n = basis.l() + 1;
    println!("Gram matrix of the tensorized basis:");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:9.5}", g[i * n + j])).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
