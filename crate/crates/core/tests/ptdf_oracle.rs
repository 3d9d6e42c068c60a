mod common;

use ccopf::grid::compute_ptdf;
use common::{angle_flows, random_grid, GridOptions};
use rand::RngExt;

#[test]
fn ptdf_matches_angle_flows_on_random_networks() {
    let opts = GridOptions { line_limit: f64::INFINITY, quadratic: false };
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = common::rng(1000 + seed);
        let n = rng.random_range(2..=30);
        let grid = random_grid(seed, n, &opts);
        let ptdf = compute_ptdf(&grid, grid.slack_bus).unwrap();
        for _ in 0..5 {
            let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mean = p.iter().sum::<f64>() / n as f64;
            p.iter_mut().for_each(|v| *v -= mean);
            let reference = angle_flows(&grid, &p);
            for (a, b) in ptdf.apply(&p).iter().zip(&reference) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst <= 1e-8, "worst flow error {worst:e}");
}

#[test]
fn flows_do_not_depend_on_slack_choice() {
    let opts = GridOptions { line_limit: f64::INFINITY, quadratic: false };
    let grid = random_grid(7, 12, &opts);
    let p: Vec<f64> = (0..12).map(|i| (i as f64 - 5.5) / 3.0).collect();
    let base = compute_ptdf(&grid, 0).unwrap().apply(&p);
    for slack in 1..12 {
        let other = compute_ptdf(&grid, slack).unwrap().apply(&p);
        for (a, b) in base.iter().zip(&other) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
