//! Random instances shared by the integration tests.
#![allow(dead_code)]

pub mod polys;

use std::path::PathBuf;

use ccopf::formulation::{BetaRule, CcOpfProblem, ChanceSpec};
use ccopf::grid::{load_case_file, Generator, Grid, Line};
use ccopf::uncertainty::{assemble_demand, load_uncertainty_spec_file, Distribution, UncertaintySource};
use faer::prelude::Solve;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// A bundled case with its bundled uncertainty file.
pub fn bundled(case: &str, unc: &str, eps: f64, rule: BetaRule) -> CcOpfProblem {
    let grid = load_case_file(data(case)).unwrap();
    let sources = load_uncertainty_spec_file(data(unc)).unwrap().sources(&grid).unwrap();
    let demand = assemble_demand(&grid, sources).unwrap();
    CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(eps, rule)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus a few chords; reactances in `[0.05, 1]`.
pub fn random_lines(rng: &mut ChaCha8Rng, n: usize, limit: f64) -> Vec<Line> {
    let limits = (-limit, limit);
    let mut lines = Vec::new();
    for to in 1..n {
        let from = rng.random_range(0..to);
        lines.push(Line {
            from,
            to,
            reactance: rng.random_range(0.05..1.0),
            limits,
        });
    }
    for _ in 0..rng.random_range(0..=n / 2) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            lines.push(Line {
                from: a,
                to: b,
                reactance: rng.random_range(0.05..1.0),
                limits,
            });
        }
    }
    lines
}

pub struct GridOptions {
    pub line_limit: f64,
    pub quadratic: bool,
}

/// Connected network with loads in `[-1, 0]`, between two and `n` units and
/// enough capacity to cover the load with a wide margin.
pub fn random_grid(seed: u64, n: usize, opts: &GridOptions) -> Grid {
    let mut rng = rng(seed);
    let lines = random_lines(&mut rng, n, opts.line_limit);
    let demand: Vec<f64> = (0..n).map(|_| -rng.random::<f64>()).collect();
    let load: f64 = -demand.iter().sum::<f64>();
    let mut buses: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        buses.swap(i, rng.random_range(0..=i));
    }
    let n_gen = rng.random_range(2..=n.clamp(2, 6));
    let cap = 2.0 * load / n_gen as f64 + 1.0;
    let generators = buses[..n_gen]
        .iter()
        .map(|&bus| Generator {
            bus,
            u_min: 0.0,
            u_max: cap * rng.random_range(0.8..1.2),
            cost_linear: rng.random_range(1.0..5.0),
            cost_quadratic: if opts.quadratic { rng.random_range(0.1..1.0) } else { 0.0 },
        })
        .collect();
    Grid::new(
        format!("random{seed}"),
        (1..=n as i64).collect(),
        demand,
        lines,
        generators,
        None,
    )
    .expect("valid random grid")
}

/// One to four sources at distinct buses, mixing families unless
/// `gaussian_only`.
pub fn random_sources(seed: u64, grid: &Grid, gaussian_only: bool) -> Vec<UncertaintySource> {
    let mut rng = rng(seed ^ 0x5eed);
    let n = grid.n_bus();
    let k = rng.random_range(1..=n.min(4));
    let mut buses: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        buses.swap(i, rng.random_range(0..=i));
    }
    buses[..k]
        .iter()
        .enumerate()
        .map(|(s, &bus)| {
            let nom = grid.nominal_demand[bus];
            let w = 0.05 + 0.2 * rng.random::<f64>();
            let dist = match if gaussian_only { 0 } else { rng.random_range(0..3) } {
                0 => Distribution::Gaussian {
                    mean: nom,
                    std: w / 3.0,
                },
                1 => Distribution::Beta {
                    a: rng.random_range(1.5..8.0),
                    b: rng.random_range(1.5..8.0),
                    lo: nom - w,
                    hi: nom + w,
                },
                _ => Distribution::Uniform { lo: nom - w, hi: nom + w },
            };
            UncertaintySource::at_bus(grid, format!("s{s}"), bus, dist).expect("valid source")
        })
        .collect()
}

pub fn random_problem(seed: u64, n: usize, opts: &GridOptions, gaussian_only: bool, eps: f64) -> CcOpfProblem {
    let grid = random_grid(seed, n, opts);
    let sources = random_sources(seed, &grid, gaussian_only);
    let demand = assemble_demand(&grid, sources).expect("demand");
    CcOpfProblem::with_grid_costs(grid, demand, ChanceSpec::new(eps, BetaRule::DistributionallyRobust))
        .expect("problem")
}

/// DC flows from the angle formulation: `B θ = p` with `θ_slack = 0`.
pub fn angle_flows(grid: &Grid, p: &[f64]) -> Vec<f64> {
    let n = grid.n_bus();
    let s = grid.slack_bus;
    let mut b = faer::Mat::<f64>::zeros(n, n);
    for l in &grid.lines {
        let y = 1.0 / l.reactance;
        b[(l.from, l.from)] += y;
        b[(l.to, l.to)] += y;
        b[(l.from, l.to)] -= y;
        b[(l.to, l.from)] -= y;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != s).collect();
    let m = keep.len();
    let red = faer::Mat::<f64>::from_fn(m, m, |r, c| b[(keep[r], keep[c])]);
    let rhs = faer::Mat::<f64>::from_fn(m, 1, |r, _| p[keep[r]]);
    let sol = red.full_piv_lu().solve(&rhs);
    let mut theta = vec![0.0; n];
    for (r, &i) in keep.iter().enumerate() {
        theta[i] = sol[(r, 0)];
    }
    grid.lines
        .iter()
        .map(|l| (theta[l.from] - theta[l.to]) / l.reactance)
        .collect()
}
