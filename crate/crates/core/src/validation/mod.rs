//! Monte Carlo audit of solved policies and the in-hindsight OPF baseline.
//!
//! Samples are drawn from one seeded stream and processed in fixed-size
//! chunks; chunk results are merged in chunk order, so reports do not
//! depend on the number of worker threads (`CCOPF_THREADS`).

mod hindsight;
mod stats;

pub use hindsight::{hindsight_opf, HindsightError, HindsightMethod, HindsightSolution, HindsightSolver};
pub use stats::{Histogram, Moments};

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::CcOpfProblem;
use crate::policy::Policy;
use crate::stochastics::{sample_germ, GermSamples, StochasticsError};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("at least {MIN_AUDIT_SAMPLES} samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("policy does not fit the problem: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Stochastics(#[from] StochasticsError),
    #[error("report output: {0}")]
    Io(String),
}

pub const MIN_AUDIT_SAMPLES: usize = 1000;
pub const DEFAULT_CASE_SAMPLES: usize = 20_000;
pub const DEFAULT_CLOSED_FORM_SAMPLES: usize = 1_000_000;
pub const HISTOGRAM_BINS: usize = 200;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    GenUpper,
    GenLower,
    LineUpper,
    LineLower,
}

/// One audited individual chance constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    pub kind: ConstraintKind,
    /// Bus id for generation limits, zero-based line index for flows.
    pub element: i64,
    pub bound: f64,
    pub epsilon: f64,
    pub satisfied: u64,
    pub frequency: f64,
    /// Exact satisfaction probability when the constrained quantity depends
    /// on a single germ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
}

impl ConstraintAudit {
    /// `frequency ≥ 1 − ε − slack·√(ε(1−ε)/n)`.
    pub fn holds(&self, samples: usize, slack: f64) -> bool {
        let se = (self.epsilon * (1.0 - self.epsilon) / samples as f64).sqrt();
        self.frequency >= 1.0 - self.epsilon - slack * se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorStats {
    pub bus: i64,
    /// PCE moments `u_{i0}` and `√Σγ_ℓ u_{iℓ}²`.
    pub policy_mean: f64,
    pub policy_std: f64,
    pub sampled_mean: f64,
    pub sampled_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopf_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopf_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HindsightSummary {
    pub solved: usize,
    /// Realizations with no feasible dispatch; excluded from statistics.
    pub infeasible: usize,
    pub lambda_search: usize,
    pub conic: usize,
    /// Samples where the policy action itself breaks a hard limit, so
    /// the objective comparison does not apply.
    pub policy_outside_limits: usize,
    pub compared: usize,
    /// `max(J_hOPF − J_policy)` over compared samples.
    pub max_objective_excess: f64,
    pub mean_objective_hopf: f64,
    pub mean_objective_policy: f64,
    pub max_balance_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdComparison {
    pub norm1_ccopf: f64,
    pub norm1_hopf: f64,
    /// `‖σ_ccopf‖₁ − ‖σ_hopf‖₁`.
    pub norm1_gap: f64,
    pub relative_gap: f64,
    /// `‖σ_hopf − σ_ccopf‖_∞`.
    pub inf_norm: f64,
    pub argmax_bus: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorHistogram {
    pub bus: i64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub case: String,
    pub sample_count: usize,
    pub seed: u64,
    pub constraints: Vec<ConstraintAudit>,
    pub max_balance_residual: f64,
    pub generators: Vec<GeneratorStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hindsight: Option<HindsightSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<StdComparison>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub histograms: Vec<GeneratorHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl ValidationReport {
    pub fn min_margin(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.frequency - (1.0 - c.epsilon))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        serde_json::from_str(text).map_err(|e| ValidationError::Io(e.to_string()))
    }

    /// Per-generator mean/std pairs (policy, sampled, hindsight).
    pub fn write_generator_csv(&self, path: &Path) -> Result<(), ValidationError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| ValidationError::Io(e.to_string()))?;
        let io = |e: csv::Error| ValidationError::Io(e.to_string());
        w.write_record(["bus", "policy_mean", "policy_std", "sampled_mean", "sampled_std", "hopf_mean", "hopf_std"])
            .map_err(io)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for g in &self.generators {
            w.write_record([
                g.bus.to_string(),
                g.policy_mean.to_string(),
                g.policy_std.to_string(),
                g.sampled_mean.to_string(),
                g.sampled_std.to_string(),
                opt(g.hopf_mean),
                opt(g.hopf_std),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| ValidationError::Io(e.to_string()))
    }

    pub fn write_constraint_csv(&self, path: &Path) -> Result<(), ValidationError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| ValidationError::Io(e.to_string()))?;
        let io = |e: csv::Error| ValidationError::Io(e.to_string());
        w.write_record(["kind", "element", "bound", "epsilon", "frequency", "closed_form"])
            .map_err(io)?;
        for c in &self.constraints {
            let kind = serde_json::to_value(c.kind).expect("kind").as_str().unwrap_or_default().to_string();
            w.write_record([
                kind,
                c.element.to_string(),
                c.bound.to_string(),
                c.epsilon.to_string(),
                c.frequency.to_string(),
                c.closed_form.map_or(String::new(), |p| p.to_string()),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| ValidationError::Io(e.to_string()))
    }

    /// Long-format density table: `bus, center, density`.
    pub fn write_histogram_csv(&self, path: &Path) -> Result<(), ValidationError> {
        let mut f = std::fs::File::create(path).map_err(|e| ValidationError::Io(e.to_string()))?;
        let mut out = String::from("bus,center,density\n");
        for h in &self.histograms {
            for (c, d) in h.histogram.centers().iter().zip(h.histogram.density()) {
                out.push_str(&format!("{},{c},{d}\n", h.bus));
            }
        }
        f.write_all(out.as_bytes()).map_err(|e| ValidationError::Io(e.to_string()))
    }
}

/// Worker pool capped by `CCOPF_THREADS` when set.
pub fn worker_pool() -> rayon::ThreadPool {
    let threads = std::env::var("CCOPF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Affine expression `c₀ + cᵀψ` for one audited quantity.
struct Audited {
    kind: ConstraintKind,
    element: i64,
    bound: f64,
    epsilon: f64,
    c0: f64,
    c: Vec<f64>,
    closed_form: Option<f64>,
}

impl Audited {
    fn satisfied(&self, psi: &[f64]) -> bool {
        let v = self.c0 + self.c.iter().zip(psi).map(|(a, b)| a * b).sum::<f64>();
        match self.kind {
            ConstraintKind::GenUpper | ConstraintKind::LineUpper => v <= self.bound,
            ConstraintKind::GenLower | ConstraintKind::LineLower => v >= self.bound,
        }
    }
}

fn audited_constraints(policy: &Policy, problem: &CcOpfProblem) -> Vec<Audited> {
    let grid = &problem.grid;
    let (n, l) = (policy.n(), policy.l());
    let mut out = Vec::new();
    for i in grid.generator_buses() {
        let g = grid.generator_at(i).expect("generator bus");
        let c: Vec<f64> = policy.u[i * l..(i + 1) * l].to_vec();
        for (kind, bound) in [(ConstraintKind::GenUpper, g.u_max), (ConstraintKind::GenLower, g.u_min)] {
            if !bound.is_finite() {
                continue;
            }
            let closed_form = policy.violation_probability_closed_form(i, bound).ok().map(|p| match kind {
                ConstraintKind::GenUpper => p,
                _ => 1.0 - p,
            });
            out.push(Audited {
                kind,
                element: grid.bus_ids[i],
                bound,
                epsilon: problem.chance.epsilon_gen,
                c0: policy.u0[i],
                c: c.clone(),
                closed_form,
            });
        }
    }
    for (j, line) in grid.lines.iter().enumerate() {
        let (lo, hi) = line.limits;
        if !lo.is_finite() && !hi.is_finite() {
            continue;
        }
        let phi = problem.ptdf.row(j);
        let c0: f64 = (0..n).map(|i| phi[i] * (policy.u0[i] + policy.d0[i])).sum();
        let c: Vec<f64> = (0..l)
            .map(|k| (0..n).map(|i| phi[i] * (policy.u[i * l + k] + policy.d[i * l + k])).sum())
            .collect();
        for (kind, bound) in [(ConstraintKind::LineUpper, hi), (ConstraintKind::LineLower, lo)] {
            if bound.is_finite() {
                out.push(Audited {
                    kind,
                    element: j as i64,
                    bound,
                    epsilon: problem.chance.epsilon_line,
                    c0,
                    c: c.clone(),
                    closed_form: None,
                });
            }
        }
    }
    out
}

/// Support of `u_i(ξ)` implied by the germ supports, or `mean ± 6σ` when a
/// germ is unbounded in the relevant direction.
fn analytic_range(policy: &Policy, bus: usize) -> (f64, f64) {
    let l = policy.l();
    let (mut lo, mut hi) = (policy.u0[bus], policy.u0[bus]);
    for (k, comp) in policy.basis.components.iter().enumerate() {
        let coef = policy.u[bus * l + k];
        if coef == 0.0 {
            continue;
        }
        let (a, b) = comp.support();
        let (pa, pb) = (comp.psi1(a), comp.psi1(b));
        let (x, y) = (coef * pa, coef * pb);
        lo += x.min(y);
        hi += x.max(y);
    }
    if lo.is_finite() && hi.is_finite() {
        return (lo, hi);
    }
    let sd = policy.std_devs()[bus];
    let m = policy.u0[bus];
    (if lo.is_finite() { lo } else { m - 6.0 * sd }, if hi.is_finite() { hi } else { m + 6.0 * sd })
}

struct ChunkResult {
    satisfied: Vec<u64>,
    max_residual: f64,
    moments: Moments,
    histograms: Vec<Histogram>,
}

/// Audits every individual chance constraint of `problem` under `policy`
/// with `count` samples drawn from `seed`.
pub fn monte_carlo_audit(
    policy: &Policy,
    problem: &CcOpfProblem,
    count: usize,
    seed: u64,
) -> Result<ValidationReport, ValidationError> {
    if count < MIN_AUDIT_SAMPLES {
        return Err(ValidationError::TooFewSamples(count));
    }
    check_compatible(policy, problem)?;
    let samples = sample_germ(&policy.basis, count, seed)?;
    Ok(audit_samples(policy, problem, &samples, seed))
}

fn check_compatible(policy: &Policy, problem: &CcOpfProblem) -> Result<(), ValidationError> {
    if policy.n() != problem.grid.n_bus() {
        return Err(ValidationError::Incompatible(format!(
            "policy has {} buses, grid has {}",
            policy.n(),
            problem.grid.n_bus()
        )));
    }
    if policy.bus_ids != problem.grid.bus_ids {
        return Err(ValidationError::Incompatible("bus ids differ".into()));
    }
    if policy.l() != problem.demand.l() {
        return Err(ValidationError::Incompatible(format!(
            "policy has {} sources, uncertainty model has {}",
            policy.l(),
            problem.demand.l()
        )));
    }
    Ok(())
}

fn audit_samples(policy: &Policy, problem: &CcOpfProblem, samples: &GermSamples, seed: u64) -> ValidationReport {
    let grid = &problem.grid;
    let gens = grid.generator_buses();
    let cons = audited_constraints(policy, problem);
    let ranges: Vec<(f64, f64)> = gens.iter().map(|&i| analytic_range(policy, i)).collect();
    let count = samples.count();
    let starts: Vec<usize> = (0..count).step_by(CHUNK).collect();

    let run = |start: usize| -> ChunkResult {
        let mut r = ChunkResult {
            satisfied: vec![0; cons.len()],
            max_residual: 0.0,
            moments: Moments::new(gens.len()),
            histograms: ranges.iter().map(|&(a, b)| Histogram::new(a, b, HISTOGRAM_BINS)).collect(),
        };
        let mut ug = vec![0.0; gens.len()];
        for k in start..(start + CHUNK).min(count) {
            let psi = policy.basis.psi(samples.row(k));
            let u = policy.evaluate_psi(&psi);
            let d = policy.evaluate_demand_psi(&psi);
            let resid: f64 = u.iter().zip(&d).map(|(a, b)| a + b).sum();
            r.max_residual = r.max_residual.max(resid.abs());
            for (c, s) in cons.iter().zip(&mut r.satisfied) {
                if c.satisfied(&psi) {
                    *s += 1;
                }
            }
            for (slot, &i) in ug.iter_mut().zip(&gens) {
                *slot = u[i];
            }
            r.moments.push(&ug);
            for (h, &v) in r.histograms.iter_mut().zip(&ug) {
                h.push(v);
            }
        }
        r
    };
    let chunks: Vec<ChunkResult> = worker_pool().install(|| starts.par_iter().map(|&s| run(s)).collect());

    let mut satisfied = vec![0u64; cons.len()];
    let mut max_residual = 0.0f64;
    let mut moments = Moments::new(gens.len());
    let mut histograms: Vec<Histogram> = ranges.iter().map(|&(a, b)| Histogram::new(a, b, HISTOGRAM_BINS)).collect();
    for c in &chunks {
        for (a, b) in satisfied.iter_mut().zip(&c.satisfied) {
            *a += b;
        }
        max_residual = max_residual.max(c.max_residual);
        moments.merge(&c.moments);
        for (a, b) in histograms.iter_mut().zip(&c.histograms) {
            a.merge(b);
        }
    }

    let stds = policy.std_devs();
    let sampled_std = moments.std();
    ValidationReport {
        case: grid.name.clone(),
        sample_count: count,
        seed,
        constraints: cons
            .iter()
            .zip(&satisfied)
            .map(|(c, &s)| ConstraintAudit {
                kind: c.kind,
                element: c.element,
                bound: c.bound,
                epsilon: c.epsilon,
                satisfied: s,
                frequency: s as f64 / count as f64,
                closed_form: c.closed_form,
            })
            .collect(),
        max_balance_residual: max_residual,
        generators: gens
            .iter()
            .enumerate()
            .map(|(k, &i)| GeneratorStats {
                bus: grid.bus_ids[i],
                policy_mean: policy.u0[i],
                policy_std: stds[i],
                sampled_mean: moments.mean[k],
                sampled_std: sampled_std[k],
                hopf_mean: None,
                hopf_std: None,
            })
            .collect(),
        hindsight: None,
        comparison: None,
        histograms: gens
            .iter()
            .zip(histograms)
            .map(|(&i, histogram)| GeneratorHistogram {
                bus: grid.bus_ids[i],
                histogram,
            })
            .collect(),
        config_hash: None,
    }
}

struct HindsightChunk {
    moments: Moments,
    summary: HindsightSummary,
    sum_hopf: f64,
    sum_policy: f64,
}

/// Runs the audit and, on the same samples, one hindsight OPF per sample;
/// fills the hOPF halves of the report and the std comparison.
pub fn audit_with_hindsight(
    policy: &Policy,
    problem: &CcOpfProblem,
    count: usize,
    seed: u64,
) -> Result<ValidationReport, ValidationError> {
    if count < MIN_AUDIT_SAMPLES {
        return Err(ValidationError::TooFewSamples(count));
    }
    check_compatible(policy, problem)?;
    let samples = sample_germ(&policy.basis, count, seed)?;
    let mut report = audit_samples(policy, problem, &samples, seed);
    let (summary, moments) = hindsight_study(policy, problem, &samples);
    let std = moments.std();
    for (k, g) in report.generators.iter_mut().enumerate() {
        g.hopf_mean = Some(moments.mean[k]);
        g.hopf_std = Some(std[k]);
    }
    report.hindsight = Some(summary);
    report.comparison = compare_std(&report);
    Ok(report)
}

/// hOPF per sample. Returns the summary and the per-generator moments of
/// the hindsight dispatch over solved samples.
pub fn hindsight_study(policy: &Policy, problem: &CcOpfProblem, samples: &GermSamples) -> (HindsightSummary, Moments) {
    let grid = &problem.grid;
    let gens = grid.generator_buses();
    let solver = HindsightSolver::new(grid, &problem.ptdf, &problem.cost);
    let count = samples.count();
    let starts: Vec<usize> = (0..count).step_by(CHUNK).collect();
    let lims = grid.gen_limits();
    let empty = || HindsightSummary {
        solved: 0,
        infeasible: 0,
        lambda_search: 0,
        conic: 0,
        policy_outside_limits: 0,
        compared: 0,
        max_objective_excess: f64::NEG_INFINITY,
        mean_objective_hopf: 0.0,
        mean_objective_policy: 0.0,
        max_balance_residual: 0.0,
    };

    let run = |start: usize| -> HindsightChunk {
        let mut c = HindsightChunk {
            moments: Moments::new(gens.len()),
            summary: empty(),
            sum_hopf: 0.0,
            sum_policy: 0.0,
        };
        let mut ug = vec![0.0; gens.len()];
        for k in start..(start + CHUNK).min(count) {
            let psi = policy.basis.psi(samples.row(k));
            let d = policy.evaluate_demand_psi(&psi);
            let up = policy.evaluate_psi(&psi);
            let sol = match solver.solve(&d) {
                Ok(s) => s,
                Err(_) => {
                    c.summary.infeasible += 1;
                    continue;
                }
            };
            c.summary.solved += 1;
            match sol.method {
                HindsightMethod::LambdaSearch => c.summary.lambda_search += 1,
                HindsightMethod::Conic => c.summary.conic += 1,
            }
            let resid: f64 = sol.u.iter().zip(&d).map(|(a, b)| a + b).sum();
            c.summary.max_balance_residual = c.summary.max_balance_residual.max(resid.abs());
            for (slot, &i) in ug.iter_mut().zip(&gens) {
                *slot = sol.u[i];
            }
            c.moments.push(&ug);
            let within = gens.iter().all(|&i| up[i] >= lims[i].0 && up[i] <= lims[i].1)
                && grid.lines.iter().enumerate().all(|(j, line)| {
                    let f: f64 = problem.ptdf.row(j).iter().enumerate().map(|(i, a)| a * (up[i] + d[i])).sum();
                    f >= line.limits.0 && f <= line.limits.1
                });
            if !within {
                c.summary.policy_outside_limits += 1;
                continue;
            }
            let jp = problem.cost.evaluate(&up);
            c.summary.compared += 1;
            c.summary.max_objective_excess = c.summary.max_objective_excess.max(sol.objective - jp);
            c.sum_hopf += sol.objective;
            c.sum_policy += jp;
        }
        c
    };
    let chunks: Vec<HindsightChunk> = worker_pool().install(|| starts.par_iter().map(|&s| run(s)).collect());

    let mut total = empty();
    let mut moments = Moments::new(gens.len());
    let (mut sh, mut sp) = (0.0, 0.0);
    for c in &chunks {
        moments.merge(&c.moments);
        let s = &c.summary;
        total.solved += s.solved;
        total.infeasible += s.infeasible;
        total.lambda_search += s.lambda_search;
        total.conic += s.conic;
        total.policy_outside_limits += s.policy_outside_limits;
        total.compared += s.compared;
        total.max_objective_excess = total.max_objective_excess.max(s.max_objective_excess);
        total.max_balance_residual = total.max_balance_residual.max(s.max_balance_residual);
        sh += c.sum_hopf;
        sp += c.sum_policy;
    }
    if total.compared > 0 {
        total.mean_objective_hopf = sh / total.compared as f64;
        total.mean_objective_policy = sp / total.compared as f64;
    }
    (total, moments)
}

/// Norm comparison of the policy standard deviations with the hindsight
/// ones; `None` until the hOPF half is filled. Both sides are sample
/// estimates over the same draws, so sampling noise cancels.
pub fn compare_std(report: &ValidationReport) -> Option<StdComparison> {
    let pairs: Vec<(i64, f64, f64)> = report
        .generators
        .iter()
        .map(|g| g.hopf_std.map(|h| (g.bus, g.sampled_std, h)))
        .collect::<Option<_>>()?;
    Some(compare_std_vectors(&pairs))
}

/// `(bus, σ_ccopf, σ_hopf)` triples.
pub fn compare_std_vectors(pairs: &[(i64, f64, f64)]) -> StdComparison {
    let n1c: f64 = pairs.iter().map(|p| p.1.abs()).sum();
    let n1h: f64 = pairs.iter().map(|p| p.2.abs()).sum();
    let (argmax_bus, inf_norm) = pairs
        .iter()
        .map(|p| (p.0, (p.2 - p.1).abs()))
        .fold((pairs.first().map_or(0, |p| p.0), 0.0), |best, x| if x.1 > best.1 { x } else { best });
    StdComparison {
        norm1_ccopf: n1c,
        norm1_hopf: n1h,
        norm1_gap: n1c - n1h,
        relative_gap: if n1h > 0.0 { (n1c - n1h) / n1h } else { 0.0 },
        inf_norm,
        argmax_bus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Settings;
    use crate::formulation::tests::{beta_problem, sin_problem};
    use crate::policy::solve_policy;

    #[test]
    fn beta_case_never_violates() {
        let p = beta_problem(0.05);
        let pol = solve_policy(&p, &Settings::default()).unwrap().policy;
        let r = monte_carlo_audit(&pol, &p, 20_000, 7).unwrap();
        assert_eq!(r.constraints.len(), 1);
        assert_eq!(r.constraints[0].frequency, 1.0);
        assert_eq!(r.constraints[0].closed_form, Some(1.0));
        assert!(r.max_balance_residual <= 1e-9);
        // bus-1 PDF lies entirely below its limit
        let h = &r.histograms[0].histogram;
        assert!(h.hi <= 0.85);
    }

    #[test]
    fn sinusoidal_frequency_tracks_closed_form() {
        let p = sin_problem(0.05);
        let pol = solve_policy(&p, &Settings::default()).unwrap().policy;
        let r = monte_carlo_audit(&pol, &p, 200_000, 11).unwrap();
        let c = &r.constraints[0];
        let exact = c.closed_form.unwrap();
        let se = (exact * (1.0 - exact) / 200_000f64).sqrt();
        assert!((c.frequency - exact).abs() <= 4.0 * se, "{} vs {exact}", c.frequency);
    }

    #[test]
    fn same_seed_same_report() {
        let p = sin_problem(0.1);
        let pol = solve_policy(&p, &Settings::default()).unwrap().policy;
        let a = audit_with_hindsight(&pol, &p, 5000, 3).unwrap();
        let b = audit_with_hindsight(&pol, &p, 5000, 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let h = a.hindsight.unwrap();
        assert_eq!(h.solved, 5000);
        assert!(h.max_objective_excess <= 1e-8);
        assert!(h.max_balance_residual <= 1e-9);
    }

    #[test]
    fn too_few_samples_rejected() {
        let p = beta_problem(0.1);
        let pol = solve_policy(&p, &Settings::default()).unwrap().policy;
        assert!(matches!(monte_carlo_audit(&pol, &p, 10, 0), Err(ValidationError::TooFewSamples(10))));
    }

    #[test]
    fn comparison_norms() {
        let same = compare_std_vectors(&[(1, 0.2, 0.2), (5, 0.1, 0.1)]);
        assert_eq!((same.norm1_gap, same.inf_norm), (0.0, 0.0));
        let c = compare_std_vectors(&[(1, 0.2, 0.25), (5, 0.3, 0.1), (9, 0.05, 0.05)]);
        assert!((c.norm1_ccopf - 0.55).abs() < 1e-15);
        assert!((c.norm1_hopf - 0.40).abs() < 1e-15);
        assert!((c.inf_norm - 0.2).abs() < 1e-15);
        assert_eq!(c.argmax_bus, 5);
    }
}
