//! Chance-constrained DC optimal power flow with exact affine polynomial
//! chaos.
//!
//! Uncertain bus injections are written as affine expansions in orthogonal
//! polynomials of independent germs. The generation policy is expanded in
//! the same basis, which turns the chance-constrained problem into a
//! second-order cone program over expansion coefficients.

pub mod cli;
pub mod conic;
pub mod formulation;
pub mod grid;
pub mod policy;
pub mod stochastics;
pub mod uncertainty;
pub mod validation;
