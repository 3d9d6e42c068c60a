//! Second-order cone programs and a primal-dual interior-point solver.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    ½xᵀPx + cᵀx + offset
//! subject to  A x = b
//!             h − G x ∈ K        K = K₁ × … × K_q (orthants and Lorentz cones)
//!             lower ≤ x ≤ upper
//! ```
//!
//! The rows of `G` are partitioned into consecutive cone blocks. A Lorentz
//! block `(s₀, s₁)` requires `‖s₁‖ ≤ s₀`. `P` is symmetric positive
//! semidefinite. The dual multipliers satisfy `Px + c + Aᵀy + Gᵀz + r = 0`
//! with `z ∈ K` and `r` the bound multipliers.
//!
//! [`solve`] runs [`presolve`], Ruiz equilibration and a homogeneous
//! self-dual interior-point method with Nesterov–Todd scaling and
//! Mehrotra's predictor-corrector, then maps everything back.

mod cones;
mod ipm;
mod kkt;
mod polish;
mod presolve;
mod sparse;

pub use presolve::{presolve, Presolved, PresolveReport};
pub use sparse::{SparseMatrix, Triplets};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("malformed conic problem: {0}")]
    Malformed(String),
    #[error("presolve detected primal infeasibility: {0}")]
    PresolveInfeasible(String),
    #[error("presolve detected an unbounded direction: {0}")]
    PresolveUnbounded(String),
    #[error("conic problem dump is not valid: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "dim", rename_all = "snake_case")]
pub enum Cone {
    NonNeg(usize),
    Soc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonNeg(d) | Cone::Soc(d) => d,
        }
    }
}

/// Affine expression `constant + Σ coef·x_j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        AffExpr {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn term(mut self, var: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    /// Symmetric, both triangles stored; empty (`nnz = 0`) for linear
    /// objectives.
    pub p: SparseMatrix,
    pub c: Vec<f64>,
    pub objective_offset: f64,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub g: SparseMatrix,
    pub h: Vec<f64>,
    pub cones: Vec<Cone>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_names: Vec<String>,
}

impl ConicProblem {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.n();
        let bad = |m: String| Err(ConicError::Malformed(m));
        if self.p.nrows != n || self.p.ncols != n {
            return bad(format!("P is {}×{} for {n} variables", self.p.nrows, self.p.ncols));
        }
        for r in 0..n {
            let (cols, vals) = self.p.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if (self.p.get(c, r) - v).abs() > 1e-12 * (1.0 + v.abs()) {
                    return bad(format!("P is not symmetric at ({r}, {c})"));
                }
            }
        }
        if self.a.ncols != n || self.g.ncols != n {
            return bad(format!(
                "A has {} and G has {} columns for {n} variables",
                self.a.ncols, self.g.ncols
            ));
        }
        if self.a.nrows != self.b.len() || self.g.nrows != self.h.len() {
            return bad("row counts of A/b or G/h differ".into());
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors have the wrong length".into());
        }
        if !self.var_names.is_empty() && self.var_names.len() != n {
            return bad("variable name map has the wrong length".into());
        }
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != self.g.nrows {
            return bad(format!(
                "cone dimensions sum to {total} but G has {} rows",
                self.g.nrows
            ));
        }
        if self.cones.iter().any(|c| c.dim() == 0) {
            return bad("empty cone block".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c)
            || !finite(&self.b)
            || !finite(&self.h)
            || !finite(&self.a.values)
            || !finite(&self.g.values)
            || !finite(&self.p.values)
        {
            return bad("non-finite data".into());
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return bad(format!("variable {j} has bounds [{}, {}]", self.lower[j], self.upper[j]));
            }
        }
        Ok(())
    }

    /// Serializes to the standard-form JSON dump; infinite bounds are
    /// written as `null`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConicDump::from(self)).expect("dump serializes")
    }

    pub fn from_json(source: &str) -> Result<Self, ConicError> {
        let dump: ConicDump =
            serde_json::from_str(source).map_err(|e| ConicError::Dump(e.to_string()))?;
        let p = dump.into_problem()?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConicDump {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Triplets>,
    c: Vec<f64>,
    #[serde(default)]
    objective_offset: f64,
    a: Triplets,
    b: Vec<f64>,
    g: Triplets,
    h: Vec<f64>,
    cones: Vec<Cone>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    #[serde(default)]
    var_names: Vec<String>,
}

const DUMP_FORMAT: &str = "ccopf-conic-v1";

impl From<&ConicProblem> for ConicDump {
    fn from(p: &ConicProblem) -> Self {
        let opt = |v: &[f64]| v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        ConicDump {
            format: DUMP_FORMAT.into(),
            p: (p.p.nnz() > 0).then(|| p.p.to_triplets()),
            c: p.c.clone(),
            objective_offset: p.objective_offset,
            a: p.a.to_triplets(),
            b: p.b.clone(),
            g: p.g.to_triplets(),
            h: p.h.clone(),
            cones: p.cones.clone(),
            lower: opt(&p.lower),
            upper: opt(&p.upper),
            var_names: p.var_names.clone(),
        }
    }
}

impl ConicDump {
    fn into_problem(self) -> Result<ConicProblem, ConicError> {
        if self.format != DUMP_FORMAT {
            return Err(ConicError::Dump(format!("unknown format '{}'", self.format)));
        }
        let n = self.c.len();
        Ok(ConicProblem {
            p: match &self.p {
                Some(t) => SparseMatrix::from_coordinate(t).map_err(ConicError::Dump)?,
                None => SparseMatrix::zeros(n, n),
            },
            a: SparseMatrix::from_coordinate(&self.a).map_err(ConicError::Dump)?,
            g: SparseMatrix::from_coordinate(&self.g).map_err(ConicError::Dump)?,
            lower: self
                .lower
                .iter()
                .map(|v| v.unwrap_or(f64::NEG_INFINITY))
                .collect(),
            upper: self.upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
            c: self.c,
            objective_offset: self.objective_offset,
            b: self.b,
            h: self.h,
            cones: self.cones,
            var_names: self.var_names,
        })
    }
}

/// Incremental construction of a [`ConicProblem`].
#[derive(Debug, Default)]
pub struct ConicBuilder {
    p: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<String>,
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    g: Vec<(usize, usize, f64)>,
    h: Vec<f64>,
    cones: Vec<Cone>,
    offset: f64,
}

impl ConicBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.c.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.c.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.c[var] = cost;
    }

    pub fn add_offset(&mut self, v: f64) {
        self.offset += v;
    }

    /// Adds `½·w·(Σ coef·x_j)²` to the objective; `w ≥ 0`.
    pub fn add_square(&mut self, terms: &[(usize, f64)], w: f64) {
        for &(i, a) in terms {
            for &(j, b) in terms {
                self.p.push((i, j, w * a * b));
            }
        }
    }

    /// `expr = 0`.
    pub fn add_eq(&mut self, expr: &AffExpr) {
        let r = self.b.len();
        for &(j, v) in &expr.terms {
            self.a.push((r, j, v));
        }
        self.b.push(-expr.constant);
    }

    /// Each `expr ≥ 0`.
    pub fn add_nonneg(&mut self, exprs: &[AffExpr]) {
        if exprs.is_empty() {
            return;
        }
        for e in exprs {
            self.push_g_row(e);
        }
        self.cones.push(Cone::NonNeg(exprs.len()));
    }

    /// `‖(exprs[1], …)‖ ≤ exprs[0]`.
    pub fn add_soc(&mut self, exprs: &[AffExpr]) {
        assert!(!exprs.is_empty());
        for e in exprs {
            self.push_g_row(e);
        }
        self.cones.push(Cone::Soc(exprs.len()));
    }

    fn push_g_row(&mut self, e: &AffExpr) {
        // s = h − G x = constant + Σ coef x
        let r = self.h.len();
        for &(j, v) in &e.terms {
            self.g.push((r, j, -v));
        }
        self.h.push(e.constant);
    }

    pub fn build(self) -> ConicProblem {
        let n = self.c.len();
        ConicProblem {
            p: SparseMatrix::from_triplets(n, n, &self.p),
            a: SparseMatrix::from_triplets(self.b.len(), n, &self.a),
            g: SparseMatrix::from_triplets(self.h.len(), n, &self.g),
            c: self.c,
            objective_offset: self.offset,
            b: self.b,
            h: self.h,
            cones: self.cones,
            lower: self.lower,
            upper: self.upper,
            var_names: self.names,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalError,
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the step to the cone boundary.
    pub step_fraction: f64,
    pub equilibrate: bool,
    /// Refine an optimal iterate on its guessed active set.
    pub polish: bool,
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.99,
            equilibrate: true,
            polish: true,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub pcost: f64,
    pub dcost: f64,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
    pub sigma: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    /// Multipliers of the variable bounds: `c + Aᵀy + Gᵀz + r = 0`.
    pub bound_duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
    pub trace: Vec<IterationLog>,
    pub presolve: PresolveReport,
    pub seconds: f64,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Presolve, equilibrate, solve and map back.
pub fn solve(problem: &ConicProblem, settings: &Settings) -> Result<Solution, ConicError> {
    let start = Instant::now();
    problem.validate()?;
    let pre = match presolve(problem) {
        Ok(p) => p,
        Err(ConicError::PresolveInfeasible(msg)) => {
            log::info!("presolve: infeasible ({msg})");
            return Ok(trivial(problem, SolveStatus::Infeasible, start));
        }
        Err(ConicError::PresolveUnbounded(msg)) => {
            log::info!("presolve: unbounded ({msg})");
            return Ok(trivial(problem, SolveStatus::Unbounded, start));
        }
        Err(e) => return Err(e),
    };
    let mut raw = ipm::solve_standard(&pre.reduced, settings);
    if settings.polish && raw.status == SolveStatus::Optimal {
        match polish::polish(&pre.reduced, &raw.x, &raw.s, &raw.z) {
            Some(p) => {
                raw.x = p.x;
                raw.y = p.y;
                raw.z = p.z;
                raw.s = p.s;
            }
            None => log::debug!("conic: polishing rejected"),
        }
    }
    let (x, y, z, s) = pre.recover(&raw.x, &raw.y, &raw.z, &raw.s);
    let mut sol = Solution {
        status: raw.status,
        bound_duals: Vec::new(),
        objective: 0.0,
        dual_objective: 0.0,
        kkt_residuals: KktResiduals::default(),
        iterations: raw.iterations,
        trace: raw.trace,
        presolve: pre.report.clone(),
        seconds: 0.0,
        x,
        y,
        z,
        s,
    };
    finalize(problem, &mut sol, &pre, &raw.z);
    sol.seconds = start.elapsed().as_secs_f64();
    Ok(sol)
}

fn trivial(problem: &ConicProblem, status: SolveStatus, start: Instant) -> Solution {
    let n = problem.n();
    Solution {
        status,
        x: vec![0.0; n],
        y: vec![0.0; problem.b.len()],
        z: vec![0.0; problem.h.len()],
        s: vec![0.0; problem.h.len()],
        bound_duals: vec![0.0; n],
        objective: f64::NAN,
        dual_objective: f64::NAN,
        kkt_residuals: KktResiduals::default(),
        iterations: 0,
        trace: Vec::new(),
        presolve: PresolveReport::default(),
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Objective values, bound multipliers and KKT residuals in the original
/// problem's terms.
fn finalize(problem: &ConicProblem, sol: &mut Solution, pre: &Presolved, reduced_z: &[f64]) {
    let n = problem.n();
    let px = problem.p.mul(&sol.x);
    let mut stat = problem.c.clone();
    stat.iter_mut().zip(&px).for_each(|(s, v)| *s += v);
    problem.a.tmul_acc(&sol.y, &mut stat, 1.0);
    problem.g.tmul_acc(&sol.z, &mut stat, 1.0);
    sol.bound_duals = pre.bound_duals(reduced_z, &stat);
    if sol.status != SolveStatus::Optimal
        && sol.status != SolveStatus::MaxIter
        && sol.status != SolveStatus::NumericalError
    {
        return;
    }
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut rp_eq = problem.a.mul(&sol.x);
    rp_eq.iter_mut().zip(&problem.b).for_each(|(r, b)| *r -= b);
    let mut rp_cone = problem.g.mul(&sol.x);
    for k in 0..rp_cone.len() {
        rp_cone[k] += sol.s[k] - problem.h[k];
    }
    let bound_viol = (0..n).fold(0.0f64, |m, j| {
        m.max(problem.lower[j] - sol.x[j]).max(sol.x[j] - problem.upper[j])
    });
    let primal = (inf(&rp_eq) / (1.0 + inf(&problem.b)))
        .max(inf(&rp_cone) / (1.0 + inf(&problem.h)))
        .max(bound_viol / (1.0 + inf(&sol.x)));
    let dual_res: Vec<f64> = stat.iter().zip(&sol.bound_duals).map(|(a, r)| a + r).collect();
    let dual = inf(&dual_res) / (1.0 + inf(&problem.c));
    let quad = 0.5 * px.iter().zip(&sol.x).map(|(a, b)| a * b).sum::<f64>();
    let pcost: f64 = problem.c.iter().zip(&sol.x).map(|(a, b)| a * b).sum::<f64>() + quad;
    let bound_term: f64 = (0..n)
        .map(|j| {
            let r = sol.bound_duals[j];
            if r > 0.0 {
                r * problem.upper[j]
            } else if r < 0.0 {
                r * problem.lower[j]
            } else {
                0.0
            }
        })
        .sum();
    let dcost = -problem.b.iter().zip(&sol.y).map(|(a, b)| a * b).sum::<f64>()
        - problem.h.iter().zip(&sol.z).map(|(a, b)| a * b).sum::<f64>()
        - bound_term
        - quad;
    sol.objective = pcost + problem.objective_offset;
    sol.dual_objective = dcost + problem.objective_offset;
    sol.kkt_residuals = KktResiduals {
        primal,
        dual,
        gap: (pcost - dcost).abs() / (1.0 + pcost.abs()),
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_with_lower_bound() {
        // min x  s.t. x ≥ 1
        let mut b = ConicBuilder::new();
        let x = b.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        b.add_nonneg(&[AffExpr::constant(-1.0).term(x, 1.0)]);
        let sol = solve(&b.build(), &Settings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
        assert!((sol.z[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn norm_cone() {
        // min t  s.t. ‖(3, 4)‖ ≤ t
        let mut b = ConicBuilder::new();
        let t = b.add_var("t", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        b.add_soc(&[
            AffExpr::constant(0.0).term(t, 1.0),
            AffExpr::constant(3.0),
            AffExpr::constant(4.0),
        ]);
        let sol = solve(&b.build(), &Settings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 5.0).abs() < 1e-7);
        assert!(sol.kkt_residuals.gap < 1e-8);
    }

    #[test]
    fn bounds_only_problem() {
        let mut b = ConicBuilder::new();
        b.add_var("x", -1.0, 2.0, 1.0);
        b.add_var("y", -1.0, 2.0, -1.0);
        let sol = solve(&b.build(), &Settings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.x, vec![-1.0, 2.0]);
        assert!((sol.objective + 3.0).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let mut b = ConicBuilder::new();
        let x = b.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = b.add_var("y", f64::NEG_INFINITY, 3.0, 2.0);
        b.add_eq(&AffExpr::constant(-1.0).term(x, 1.0).term(y, 1.0));
        b.add_soc(&[AffExpr::constant(2.0), AffExpr::constant(0.0).term(x, 1.0)]);
        let p = b.build();
        let q = ConicProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(q.a, p.a);
        assert_eq!(q.g, p.g);
        assert_eq!(q.lower, p.lower);
        assert_eq!(q.upper, p.upper);
        assert_eq!(q.cones, p.cones);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        // x ≥ 1 and x ≤ 0
        let mut b = ConicBuilder::new();
        let x = b.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        b.add_nonneg(&[
            AffExpr::constant(-1.0).term(x, 1.0),
            AffExpr::constant(0.0).term(x, -1.0),
        ]);
        let sol = solve(&b.build(), &Settings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);

        // min −x  s.t. x ≥ 0 (through a cone row)
        let mut b = ConicBuilder::new();
        let x = b.add_var("x", f64::NEG_INFINITY, f64::INFINITY, -1.0);
        let y = b.add_var("y", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        b.add_nonneg(&[AffExpr::constant(0.0).term(x, 1.0).term(y, 1.0)]);
        b.add_eq(&AffExpr::constant(0.0).term(y, 1.0));
        let sol = solve(&b.build(), &Settings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }
}
