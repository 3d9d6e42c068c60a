//! Command-line surface: `solve`, `validate` and `report`.
//!
//! Every file written carries the configuration hash and the seed. Exit
//! codes: 0 success, 2 bad input, 3 infeasible, 4 solver failure, 1 other.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conic::{Settings, SolveStatus};
use crate::formulation::{BetaRule, CcOpfProblem, ChanceSpec, CostSpec};
use crate::grid::load_case_file;
use crate::policy::{solve_policy, Policy, PolicyError, PolicyMeta};
use crate::uncertainty::{assemble_demand, load_uncertainty_spec_file};
use crate::validation::{
    audit_with_hindsight, monte_carlo_audit, ConstraintKind, ValidationError, ValidationReport,
    DEFAULT_CASE_SAMPLES, DEFAULT_CLOSED_FORM_SAMPLES,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::NotOptimal {
                status: SolveStatus::Infeasible,
                ..
            } => CliError::Infeasible(e.to_string()),
            PolicyError::NotOptimal { .. } | PolicyError::Conic(_) => CliError::Solver(e.to_string()),
            PolicyError::Formulation(_) | PolicyError::File(_) | PolicyError::Dimension(_) => {
                CliError::Parse(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        match e {
            ValidationError::TooFewSamples(_) | ValidationError::Incompatible(_) => CliError::Parse(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Other(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "ccopf", version, about = "Chance-constrained DC optimal power flow with affine PCE policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Violation probability for generator and line chance constraints.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub eps: f64,
    /// Separate violation probability for lines (defaults to --eps).
    #[arg(long, global = true)]
    pub eps_line: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = BetaRuleArg::Robust)]
    pub beta_rule: BetaRuleArg,
    /// Monte Carlo samples for `validate`.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "ccopf-out")]
    pub out: PathBuf,
    /// Interior-point tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRuleArg {
    /// `√((1 − ε)/ε)`.
    Robust,
    /// `Φ⁻¹(1 − ε)`.
    Gaussian,
}

impl From<BetaRuleArg> for BetaRule {
    fn from(b: BetaRuleArg) -> Self {
        match b {
            BetaRuleArg::Robust => BetaRule::DistributionallyRobust,
            BetaRuleArg::Gaussian => BetaRule::GaussianExact,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal affine policy.
    Solve(ProblemArgs),
    /// Audit a policy by Monte Carlo and optionally against hindsight OPF.
    Validate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Policy file written by `solve`.
        policy: PathBuf,
        /// Also solve one hindsight OPF per sample on this many samples.
        #[arg(long)]
        hindsight: Option<Option<usize>>,
    },
    /// Summarize validation reports.
    Report {
        reports: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Case file (JSON or MATPOWER `.m`).
    pub case: PathBuf,
    /// Uncertainty specification (JSON).
    pub uncertainty: PathBuf,
    /// Cost override (JSON `CostSpec`); the case's generator costs otherwise.
    #[arg(long)]
    pub cost: Option<PathBuf>,
}

/// Everything that determines the optimization problem. Its hash covers
/// the file contents, so it is stable across checkouts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub case: PathBuf,
    pub uncertainty: PathBuf,
    pub cost: Option<PathBuf>,
    pub epsilon_gen: f64,
    pub epsilon_line: f64,
    pub beta_rule: BetaRuleArg,
    pub tol: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(problem: &ProblemArgs, common: &CommonArgs) -> Self {
        RunConfig {
            case: problem.case.clone(),
            uncertainty: problem.uncertainty.clone(),
            cost: problem.cost.clone(),
            epsilon_gen: common.eps,
            epsilon_line: common.eps_line.unwrap_or(common.eps),
            beta_rule: common.beta_rule,
            tol: common.tol,
            seed: common.seed,
        }
    }

    /// SHA-256 over file contents and problem parameters (not the seed).
    pub fn hash(&self) -> Result<String, CliError> {
        let mut h = Sha256::new();
        for path in [Some(&self.case), Some(&self.uncertainty), self.cost.as_ref()].into_iter().flatten() {
            let bytes = std::fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        let params = serde_json::json!({
            "epsilon_gen": self.epsilon_gen,
            "epsilon_line": self.epsilon_line,
            "beta_rule": self.beta_rule,
            "tol": self.tol,
        });
        h.update(params.to_string().as_bytes());
        Ok(hex::encode(h.finalize()))
    }

    pub fn build_problem(&self) -> Result<CcOpfProblem, CliError> {
        let parse = |e: &dyn std::fmt::Display| CliError::Parse(e.to_string());
        let grid = load_case_file(&self.case).map_err(|e| parse(&format!("{}: {e}", self.case.display())))?;
        let spec = load_uncertainty_spec_file(&self.uncertainty)
            .map_err(|e| parse(&format!("{}: {e}", self.uncertainty.display())))?;
        let sources = spec.sources(&grid).map_err(|e| parse(&e))?;
        let demand = assemble_demand(&grid, sources).map_err(|e| parse(&e))?;
        let chance = ChanceSpec {
            epsilon_gen: self.epsilon_gen,
            epsilon_line: self.epsilon_line,
            beta_rule: self.beta_rule.into(),
        };
        let problem = match &self.cost {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                let cost: CostSpec = serde_json::from_str(&text).map_err(|e| parse(&format!("{}: {e}", path.display())))?;
                CcOpfProblem::new(grid, demand, cost, chance)
            }
            None => CcOpfProblem::with_grid_costs(grid, demand, chance),
        };
        problem.map_err(|e| parse(&e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub case: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub solve_seconds: f64,
    pub n_variables: usize,
    pub epsilon_gen: f64,
    pub epsilon_line: f64,
    pub beta_gen: f64,
    pub beta_line: f64,
    pub config_hash: String,
    pub seed: u64,
}

/// Runs one command; output files go to `common.out`.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Solve(p) => cmd_solve(&RunConfig::new(p, &cli.common), &cli.common.out),
        Command::Validate {
            problem,
            policy,
            hindsight,
        } => {
            let hindsight = hindsight.map(|n| n.unwrap_or(DEFAULT_CASE_SAMPLES));
            let samples = cli.common.samples.unwrap_or(DEFAULT_CLOSED_FORM_SAMPLES);
            cmd_validate(&RunConfig::new(problem, &cli.common), policy, samples, hindsight, &cli.common.out)
        }
        Command::Report { reports } => cmd_report(reports),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn cmd_solve(config: &RunConfig, out: &Path) -> Result<String, CliError> {
    let hash = config.hash()?;
    let problem = config.build_problem()?;
    let t = Instant::now();
    let solved = solve_policy(
        &problem,
        &Settings {
            tol: config.tol,
            ..Settings::default()
        },
    )?;
    let seconds = t.elapsed().as_secs_f64();
    let chance = &problem.chance;
    let (beta_gen, beta_line) = (
        chance.beta_gen().map_err(|e| CliError::Parse(e.to_string()))?,
        chance.beta_line().map_err(|e| CliError::Parse(e.to_string()))?,
    );
    let sol = &solved.solution;
    let summary = SolveSummary {
        case: problem.grid.name.clone(),
        status: sol.status,
        objective: sol.objective,
        iterations: sol.iterations,
        primal_residual: sol.kkt_residuals.primal,
        dual_residual: sol.kkt_residuals.dual,
        gap: sol.kkt_residuals.gap,
        solve_seconds: seconds,
        n_variables: problem.layout().n_policy_vars(),
        epsilon_gen: chance.epsilon_gen,
        epsilon_line: chance.epsilon_line,
        beta_gen,
        beta_line,
        config_hash: hash.clone(),
        seed: config.seed,
    };
    let meta = PolicyMeta {
        case: problem.grid.name.clone(),
        objective: Some(sol.objective),
        epsilon_gen: Some(chance.epsilon_gen),
        epsilon_line: Some(chance.epsilon_line),
        beta_gen: Some(beta_gen),
        beta_line: Some(beta_line),
        config_hash: Some(hash),
        seed: Some(config.seed),
    };
    ensure_dir(out)?;
    let policy_path = out.join("policy.json");
    solved.policy.save(&policy_path, meta)?;
    write_json(&out.join("solve.json"), &summary)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{}: optimal in {} iterations ({:.3} s), expected cost {:.6}",
        summary.case, summary.iterations, seconds, summary.objective
    );
    let _ = writeln!(text, "config {} seed {}", summary.config_hash, summary.seed);
    text.push_str(&policy_table(&solved.policy, &problem));
    let _ = writeln!(text, "wrote {}", policy_path.display());
    Ok(text)
}

fn policy_table(policy: &Policy, problem: &CcOpfProblem) -> String {
    let gens = problem.grid.generator_buses();
    let mut text = String::new();
    if gens.len() > 12 {
        let _ = writeln!(text, "{} generators; see policy.json", gens.len());
        return text;
    }
    let _ = write!(text, "{:>6} {:>10}", "bus", "u0");
    for l in 1..=policy.l() {
        let _ = write!(text, " {:>10}", format!("u{l}"));
    }
    text.push('\n');
    for &i in &gens {
        let _ = write!(text, "{:>6} {:>10.4}", policy.bus_ids[i], policy.u0[i]);
        for l in 0..policy.l() {
            let _ = write!(text, " {:>10.4}", policy.u[i * policy.l() + l]);
        }
        text.push('\n');
    }
    text
}

/// Relative agreement required between the recorded objective and the
/// one recomputed from the policy coefficients.
const OBJECTIVE_ROUND_TRIP_TOL: f64 = 1e-8;

pub fn cmd_validate(
    config: &RunConfig,
    policy_path: &Path,
    samples: usize,
    hindsight: Option<usize>,
    out: &Path,
) -> Result<String, CliError> {
    let hash = config.hash()?;
    let problem = config.build_problem()?;
    let (policy, meta) = Policy::load(policy_path).map_err(|e| CliError::Parse(format!("{}: {e}", policy_path.display())))?;
    if policy.bus_ids != problem.grid.bus_ids || policy.l() != problem.demand.l() {
        return Err(CliError::Parse(format!(
            "{} does not match the case and uncertainty model",
            policy_path.display()
        )));
    }
    let recomputed = problem.expected_cost(&policy.u0, &policy.u);
    let mut text = String::new();
    if let Some(recorded) = meta.objective {
        let dev = (recorded - recomputed).abs() / recorded.abs().max(1.0);
        let _ = writeln!(
            text,
            "objective from coefficients {recomputed:.10} (recorded {recorded:.10}, deviation {dev:.1e})"
        );
        if dev > OBJECTIVE_ROUND_TRIP_TOL {
            return Err(CliError::Parse(format!(
                "policy objective {recorded} does not match its coefficients ({recomputed})"
            )));
        }
    }
    if meta.config_hash.as_deref().is_some_and(|h| h != hash) {
        let _ = writeln!(text, "note: policy was solved under a different configuration");
    }

    ensure_dir(out)?;
    let mut report = monte_carlo_audit(&policy, &problem, samples, config.seed)?;
    report.config_hash = Some(hash.clone());
    write_report(&report, out, "")?;
    write_policy_lines(&policy, &problem, &out.join("policy_lines.csv"), &hash, config.seed)?;
    let _ = writeln!(
        text,
        "audited {} samples (seed {}): min margin {:+.4}, max balance residual {:.1e}",
        report.sample_count,
        report.seed,
        report.min_margin(),
        report.max_balance_residual
    );

    if let Some(n) = hindsight {
        let mut h = audit_with_hindsight(&policy, &problem, n, config.seed)?;
        h.config_hash = Some(hash.clone());
        write_report(&h, out, "hindsight_")?;
        write_std_pairs(&h, &out.join("std_comparison.csv"))?;
        if let (Some(s), Some(c)) = (&h.hindsight, &h.comparison) {
            let _ = writeln!(
                text,
                "hindsight OPF on {n} samples: {} solved, {} infeasible; |σ_ccopf|₁ {:.4}, |σ_hopf|₁ {:.4}",
                s.solved, s.infeasible, c.norm1_ccopf, c.norm1_hopf
            );
        }
    }
    let _ = writeln!(text, "wrote reports to {}", out.display());
    Ok(text)
}

fn write_report(report: &ValidationReport, out: &Path, prefix: &str) -> Result<(), CliError> {
    let path = out.join(format!("{prefix}report.json"));
    std::fs::write(&path, report.to_json()).map_err(io_err(&path))?;
    report.write_generator_csv(&out.join(format!("{prefix}generators.csv")))?;
    report.write_constraint_csv(&out.join(format!("{prefix}constraints.csv")))?;
    report.write_histogram_csv(&out.join(format!("{prefix}histograms.csv")))?;
    for name in ["generators", "constraints", "histograms"] {
        let path = out.join(format!("{prefix}{name}.csv"));
        let body = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        std::fs::write(&path, provenance_line(report.config_hash.as_deref(), report.seed) + &body).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Leading comment line of every CSV output.
fn provenance_line(hash: Option<&str>, seed: u64) -> String {
    format!("# config {} seed {seed}\n", hash.unwrap_or("-"))
}

/// Paired standard deviations per generator bus.
fn write_std_pairs(report: &ValidationReport, path: &Path) -> Result<(), CliError> {
    let mut s = provenance_line(report.config_hash.as_deref(), report.seed);
    s.push_str("bus,sigma_ccopf,sigma_hopf\n");
    for g in &report.generators {
        if let Some(h) = g.hopf_std {
            let _ = writeln!(s, "{},{},{}", g.bus, g.sampled_std, h);
        }
    }
    std::fs::write(path, s).map_err(io_err(path))
}

const LINE_POINTS: usize = 101;

/// Each generator's output as one source sweeps its range with the others
/// at their mean; long format `source,xi,total_demand,bus,u`.
pub fn write_policy_lines(
    policy: &Policy,
    problem: &CcOpfProblem,
    path: &Path,
    hash: &str,
    seed: u64,
) -> Result<(), CliError> {
    let gens = problem.grid.generator_buses();
    let l = policy.l();
    let mut s = provenance_line(Some(hash), seed);
    s.push_str("source,xi,total_demand,bus,u\n");
    let (offset, slope) = policy.germ_map();
    for (k, comp) in policy.basis.components.iter().enumerate() {
        let (mut a, mut b) = comp.support();
        let mean = -offset[k] / slope[k];
        let sd = comp.gamma1.sqrt() / slope[k].abs();
        if !a.is_finite() {
            a = mean - 3.0 * sd;
        }
        if !b.is_finite() {
            b = mean + 3.0 * sd;
        }
        let id = problem.demand.sources.get(k).map_or_else(|| format!("xi{}", k + 1), |s| s.id.clone());
        for p in 0..LINE_POINTS {
            let xi_k = a + (b - a) * p as f64 / (LINE_POINTS - 1) as f64;
            let mut psi = vec![0.0; l];
            psi[k] = comp.psi1(xi_k);
            let u = policy.evaluate_psi(&psi);
            let total: f64 = policy.evaluate_demand_psi(&psi).iter().sum();
            for &i in &gens {
                let _ = writeln!(s, "{id},{xi_k},{total},{},{}", policy.bus_ids[i], u[i]);
            }
        }
    }
    std::fs::write(path, s).map_err(io_err(path))
}

fn kind_label(kind: ConstraintKind) -> &'static str {
    match kind {
        ConstraintKind::GenUpper => "gen upper",
        ConstraintKind::GenLower => "gen lower",
        ConstraintKind::LineUpper => "line upper",
        ConstraintKind::LineLower => "line lower",
    }
}

/// Markdown summary of one or more report files.
pub fn cmd_report(paths: &[PathBuf]) -> Result<String, CliError> {
    if paths.is_empty() {
        return Err(CliError::Parse("usage: ccopf report <report.json>...".into()));
    }
    let mut text = String::new();
    for path in paths {
        let raw = std::fs::read_to_string(path).map_err(io_err(path))?;
        let r = ValidationReport::from_json(&raw).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        text.push_str(&render_report(&r));
        text.push('\n');
    }
    Ok(text)
}

pub fn render_report(r: &ValidationReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "## {}\n", if r.case.is_empty() { "report" } else { &r.case });
    let _ = writeln!(
        t,
        "samples {} | seed {} | config {}\n",
        r.sample_count,
        r.seed,
        r.config_hash.as_deref().unwrap_or("-")
    );
    let failing: Vec<_> = r.constraints.iter().filter(|c| c.frequency < 1.0 - c.epsilon).collect();
    if r.constraints.is_empty() {
        let _ = writeln!(t, "no chance constraints audited\n");
    } else if failing.is_empty() {
        let min = r.constraints.iter().map(|c| c.frequency).fold(f64::INFINITY, f64::min);
        let _ = writeln!(t, "all audited constraints satisfied with frequency {min:.4}\n");
    } else {
        let _ = writeln!(
            t,
            "{} of {} audited constraints below 1 − ε\n",
            failing.len(),
            r.constraints.len()
        );
    }
    if !r.constraints.is_empty() {
        t.push_str("| constraint | element | bound | ε | frequency | closed form |\n|---|---|---|---|---|---|\n");
        for c in &r.constraints {
            let _ = writeln!(
                t,
                "| {} | {} | {:.4} | {} | {:.4} | {} |",
                kind_label(c.kind),
                c.element,
                c.bound,
                c.epsilon,
                c.frequency,
                c.closed_form.map_or("-".into(), |p| format!("{p:.4}"))
            );
        }
        t.push('\n');
    }
    let _ = writeln!(t, "max balance residual {:.2e}\n", r.max_balance_residual);
    if let Some(h) = &r.hindsight {
        let _ = writeln!(
            t,
            "hindsight OPF: {} solved, {} infeasible, {} compared; max J_hOPF − J_policy {:.3e}\n",
            h.solved, h.infeasible, h.compared, h.max_objective_excess
        );
    }
    if let Some(c) = &r.comparison {
        let _ = writeln!(t, "‖σ_ccopf‖₁ = {:.4}, ‖σ_hopf‖₁ = {:.4}", c.norm1_ccopf, c.norm1_hopf);
        let _ = writeln!(
            t,
            "1-norm gap {:+.4} ({:+.2} %), ‖σ_hopf − σ_ccopf‖∞ = {:.4} at bus {}",
            c.norm1_gap,
            100.0 * c.relative_gap,
            c.inf_norm,
            c.argmax_bus
        );
    }
    t
}
