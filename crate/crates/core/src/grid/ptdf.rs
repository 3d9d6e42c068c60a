use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::{Grid, GridError};

/// Power transfer distribution factors of a DC network.
///
/// `matrix` is built with a single slack bus, so its slack column is zero
/// and `matrix · p` equals the DC line flows for every balanced injection
/// `p` (`1ᵀp = 0`). [`Ptdf::flows`] first projects `p` onto the balanced
/// subspace, which makes a uniform injection shift move no flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ptdf {
    pub n_line: usize,
    pub n_bus: usize,
    pub slack_bus: usize,
    /// Row-major `n_line × n_bus`.
    pub matrix: Vec<f64>,
}

impl Ptdf {
    pub fn row(&self, line: usize) -> &[f64] {
        &self.matrix[line * self.n_bus..(line + 1) * self.n_bus]
    }

    pub fn get(&self, line: usize, bus: usize) -> f64 {
        self.matrix[line * self.n_bus + bus]
    }

    /// Line flows for the net injection `p`, after removing its mean.
    pub fn flows(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.n_bus);
        let mean = p.iter().sum::<f64>() / self.n_bus as f64;
        (0..self.n_line)
            .map(|l| {
                self.row(l)
                    .iter()
                    .zip(p)
                    .map(|(a, b)| a * (b - mean))
                    .sum()
            })
            .collect()
    }

    /// Same as `matrix · p` with no projection; exact for balanced `p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n_line)
            .map(|l| self.row(l).iter().zip(p).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// The operator `φ (I − 11ᵀ/N)`, whose rows sum to zero. It does not
    /// depend on the slack bus.
    pub fn balanced_matrix(&self) -> Vec<f64> {
        let mut out = self.matrix.clone();
        for l in 0..self.n_line {
            let row = &mut out[l * self.n_bus..(l + 1) * self.n_bus];
            let mean = row.iter().sum::<f64>() / self.n_bus as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        out
    }
}

/// Builds the PTDF from the reduced nodal susceptance matrix: delete the
/// slack row and column, invert, and pre-multiply by the branch
/// susceptance-incidence matrix.
pub fn compute_ptdf(grid: &Grid, slack_bus: usize) -> Result<Ptdf, GridError> {
    let n = grid.n_bus();
    if slack_bus >= n {
        return Err(GridError::InvalidSlack(slack_bus));
    }
    let n_line = grid.n_line();
    if n == 1 {
        return Ok(Ptdf {
            n_line,
            n_bus: n,
            slack_bus,
            matrix: vec![0.0; n_line],
        });
    }
    // position in the reduced system, None for the slack
    let reduced: Vec<Option<usize>> = (0..n)
        .map(|i| match i.cmp(&slack_bus) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect();
    let mut b = Mat::<f64>::zeros(n - 1, n - 1);
    for line in &grid.lines {
        let y = 1.0 / line.reactance;
        let (f, t) = (reduced[line.from], reduced[line.to]);
        if let Some(f) = f {
            b[(f, f)] += y;
        }
        if let Some(t) = t {
            b[(t, t)] += y;
        }
        if let (Some(f), Some(t)) = (f, t) {
            b[(f, t)] -= y;
            b[(t, f)] -= y;
        }
    }
    let llt = b
        .llt(Side::Lower)
        .map_err(|_| GridError::SingularSusceptance)?;
    let inverse = llt.inverse();

    let mut matrix = vec![0.0; n_line * n];
    for (l, line) in grid.lines.iter().enumerate() {
        let y = 1.0 / line.reactance;
        let row = &mut matrix[l * n..(l + 1) * n];
        for bus in 0..n {
            let Some(k) = reduced[bus] else { continue };
            let theta_from = reduced[line.from].map_or(0.0, |f| inverse[(f, k)]);
            let theta_to = reduced[line.to].map_or(0.0, |t| inverse[(t, k)]);
            row[bus] = y * (theta_from - theta_to);
        }
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(GridError::SingularSusceptance);
    }
    Ok(Ptdf {
        n_line,
        n_bus: n,
        slack_bus,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Generator, Line};

    fn ring3() -> Grid {
        let line = |from, to| Line {
            from,
            to,
            reactance: 0.5,
            limits: (f64::NEG_INFINITY, f64::INFINITY),
        };
        Grid::new(
            "ring",
            vec![1, 2, 3],
            vec![0.0; 3],
            vec![line(0, 1), line(1, 2), line(0, 2)],
            vec![Generator {
                bus: 0,
                u_min: 0.0,
                u_max: 1.0,
                cost_linear: 0.0,
                cost_quadratic: 0.0,
            }],
            None,
        )
        .unwrap()
    }

    #[test]
    fn two_bus_sensitivity() {
        // hand computation: θ₂ = x·p₂, flow(1→2) = (θ₁ − θ₂)/x = −p₂
        let g = Grid::new(
            "two",
            vec![1, 2],
            vec![0.0; 2],
            vec![Line {
                from: 0,
                to: 1,
                reactance: 0.3,
                limits: (f64::NEG_INFINITY, f64::INFINITY),
            }],
            vec![],
            Some(0),
        )
        .unwrap();
        let ptdf = compute_ptdf(&g, 0).unwrap();
        assert!((ptdf.get(0, 0)).abs() < 1e-15);
        assert!((ptdf.get(0, 1) + 1.0).abs() < 1e-12);
        let flows = ptdf.flows(&[1.0, -1.0]);
        assert!((flows[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_ring_splits_two_thirds() {
        // 1 unit injected at bus 1 and withdrawn at bus 2: the direct path
        // carries 2/3, the two-line detour 1/3.
        let g = ring3();
        let ptdf = compute_ptdf(&g, 0).unwrap();
        let f = ptdf.apply(&[1.0, -1.0, 0.0]);
        assert!((f[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((f[1] + 1.0 / 3.0).abs() < 1e-12);
        assert!((f[2] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_injection_moves_no_flow() {
        let g = ring3();
        let ptdf = compute_ptdf(&g, 2).unwrap();
        assert!(ptdf.flows(&[3.0; 3]).iter().all(|f| f.abs() < 1e-12));
        let balanced = ptdf.balanced_matrix();
        for l in 0..3 {
            let s: f64 = balanced[l * 3..l * 3 + 3].iter().sum();
            assert!(s.abs() < 1e-10);
        }
        for l in 0..3 {
            assert_eq!(ptdf.get(l, 2), 0.0);
        }
    }

    #[test]
    fn rejects_bad_slack() {
        assert!(matches!(
            compute_ptdf(&ring3(), 3),
            Err(GridError::InvalidSlack(3))
        ));
    }
}
