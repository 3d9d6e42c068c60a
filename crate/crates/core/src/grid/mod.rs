//! Network data model for the DC approximation.
//!
//! A [`Grid`] is built once, validated, and then shared read-only. Buses are
//! addressed internally by their position `0..n_bus`; the external labels
//! from the case file are kept in [`Grid::bus_ids`].

mod case;
mod matpower;
mod ptdf;

pub use case::{load_case, load_case_file, CaseDocument, CaseBus, CaseGenerator, CaseLine};
pub use matpower::{load_matpower, load_matpower_file, MatpowerOptions};
pub use ptdf::{compute_ptdf, Ptdf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("case document is not valid: {0}")]
    Schema(String),
    #[error("failed to read case file: {0}")]
    Io(#[from] std::io::Error),
    #[error("matpower parse error on line {line}: {message}")]
    Matpower { line: usize, message: String },
    #[error("case has no buses")]
    Empty,
    #[error("duplicate bus id {0}")]
    DuplicateBus(i64),
    #[error("{element} {index} references unknown bus id {bus}")]
    UnknownBus {
        element: &'static str,
        index: usize,
        bus: i64,
    },
    #[error("line {index} has nonpositive reactance {reactance}")]
    NonpositiveReactance { index: usize, reactance: f64 },
    #[error("line {index} connects bus {bus} to itself")]
    SelfLoop { index: usize, bus: i64 },
    #[error("generator {index} has inverted limits [{lower}, {upper}]")]
    InvertedGenLimits { index: usize, lower: f64, upper: f64 },
    #[error("line {index} has inverted flow limits [{lower}, {upper}]")]
    InvertedLineLimits { index: usize, lower: f64, upper: f64 },
    #[error("generator {index} has invalid cost coefficients")]
    InvalidCost { index: usize },
    #[error("bus {0} hosts more than one generator")]
    DuplicateGenerator(i64),
    #[error("network is disconnected: bus {0} is unreachable from bus {1}")]
    Disconnected(i64, i64),
    #[error("slack bus index {0} is out of range")]
    InvalidSlack(usize),
    #[error("reduced susceptance matrix is singular")]
    SingularSusceptance,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A transmission line of the DC model. Flow is positive from `from` to `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series reactance in per-unit, strictly positive.
    pub reactance: f64,
    /// Flow limits `(lower, upper)`; infinite entries mean unlimited.
    pub limits: (f64, f64),
}

/// One dispatchable unit attached to a bus.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub u_min: f64,
    pub u_max: f64,
    /// Linear cost coefficient `h_i`.
    pub cost_linear: f64,
    /// Diagonal quadratic cost coefficient `H_ii` (cost is `½ H u² + h u`).
    pub cost_quadratic: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub name: String,
    pub bus_ids: Vec<i64>,
    /// Net uncontrollable injection per bus; negative values are consumption.
    pub nominal_demand: Vec<f64>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub slack_bus: usize,
    gen_at_bus: Vec<Option<usize>>,
}

impl Grid {
    /// Builds and validates a grid. `slack_bus` defaults to the first bus
    /// (by position) that hosts a generator, or bus 0 when there is none.
    pub fn new(
        name: impl Into<String>,
        bus_ids: Vec<i64>,
        nominal_demand: Vec<f64>,
        lines: Vec<Line>,
        generators: Vec<Generator>,
        slack_bus: Option<usize>,
    ) -> Result<Self, GridError> {
        let n = bus_ids.len();
        if n == 0 {
            return Err(GridError::Empty);
        }
        if nominal_demand.len() != n {
            return Err(GridError::Schema(format!(
                "{} demands for {} buses",
                nominal_demand.len(),
                n
            )));
        }
        if nominal_demand.iter().any(|d| !d.is_finite()) {
            return Err(GridError::NonFinite("nominal demand"));
        }
        let mut seen = std::collections::HashSet::new();
        for &id in &bus_ids {
            if !seen.insert(id) {
                return Err(GridError::DuplicateBus(id));
            }
        }
        for (index, line) in lines.iter().enumerate() {
            for bus in [line.from, line.to] {
                if bus >= n {
                    return Err(GridError::UnknownBus {
                        element: "line",
                        index,
                        bus: bus as i64,
                    });
                }
            }
            if !(line.reactance > 0.0) || !line.reactance.is_finite() {
                return Err(GridError::NonpositiveReactance {
                    index,
                    reactance: line.reactance,
                });
            }
            if line.from == line.to {
                return Err(GridError::SelfLoop {
                    index,
                    bus: bus_ids[line.from],
                });
            }
            let (lower, upper) = line.limits;
            if lower.is_nan() || upper.is_nan() || lower > upper {
                return Err(GridError::InvertedLineLimits {
                    index,
                    lower,
                    upper,
                });
            }
        }
        let mut gen_at_bus = vec![None; n];
        for (index, g) in generators.iter().enumerate() {
            if g.bus >= n {
                return Err(GridError::UnknownBus {
                    element: "generator",
                    index,
                    bus: g.bus as i64,
                });
            }
            if g.u_min.is_nan() || g.u_max.is_nan() || g.u_min > g.u_max {
                return Err(GridError::InvertedGenLimits {
                    index,
                    lower: g.u_min,
                    upper: g.u_max,
                });
            }
            if !g.cost_linear.is_finite() || !g.cost_quadratic.is_finite() || g.cost_quadratic < 0.0
            {
                return Err(GridError::InvalidCost { index });
            }
            if gen_at_bus[g.bus].replace(index).is_some() {
                return Err(GridError::DuplicateGenerator(bus_ids[g.bus]));
            }
        }
        let slack_bus = match slack_bus {
            Some(s) if s >= n => return Err(GridError::InvalidSlack(s)),
            Some(s) => s,
            None => gen_at_bus.iter().position(Option::is_some).unwrap_or(0),
        };
        let grid = Grid {
            name: name.into(),
            bus_ids,
            nominal_demand,
            lines,
            generators,
            slack_bus,
            gen_at_bus,
        };
        grid.check_connected()?;
        Ok(grid)
    }

    pub fn n_bus(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn n_line(&self) -> usize {
        self.lines.len()
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    /// Generator hosted by `bus`, if any.
    pub fn generator_at(&self, bus: usize) -> Option<&Generator> {
        self.gen_at_bus[bus].map(|g| &self.generators[g])
    }

    /// Per-bus generation limits; buses without a unit get `(0, 0)`.
    pub fn gen_limits(&self) -> Vec<(f64, f64)> {
        (0..self.n_bus())
            .map(|i| {
                self.generator_at(i)
                    .map_or((0.0, 0.0), |g| (g.u_min, g.u_max))
            })
            .collect()
    }

    /// Positions of buses that host a generator, in bus order.
    pub fn generator_buses(&self) -> Vec<usize> {
        (0..self.n_bus())
            .filter(|&i| self.gen_at_bus[i].is_some())
            .collect()
    }

    pub fn bus_index(&self, id: i64) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }

    /// Quadratic and linear cost coefficients per bus (zero where no unit).
    pub fn cost_vectors(&self) -> (Vec<f64>, Vec<f64>) {
        let mut quad = vec![0.0; self.n_bus()];
        let mut lin = vec![0.0; self.n_bus()];
        for g in &self.generators {
            quad[g.bus] = g.cost_quadratic;
            lin[g.bus] = g.cost_linear;
        }
        (quad, lin)
    }

    fn check_connected(&self) -> Result<(), GridError> {
        let n = self.n_bus();
        let mut adjacency = vec![Vec::new(); n];
        for line in &self.lines {
            adjacency[line.from].push(line.to);
            adjacency[line.to].push(line.from);
        }
        let mut visited = vec![false; n];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(bus) = stack.pop() {
            for &next in &adjacency[bus] {
                if !visited[next] {
                    visited[next] = true;
                    stack.push(next);
                }
            }
        }
        match visited.iter().position(|v| !v) {
            Some(lost) => Err(GridError::Disconnected(self.bus_ids[lost], self.bus_ids[0])),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(from: usize, to: usize, x: f64) -> Line {
        Line {
            from,
            to,
            reactance: x,
            limits: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn gen(bus: usize) -> Generator {
        Generator {
            bus,
            u_min: 0.0,
            u_max: 1.0,
            cost_linear: 1.0,
            cost_quadratic: 0.1,
        }
    }

    #[test]
    fn slack_defaults_to_first_generator_bus() {
        let g = Grid::new(
            "t",
            vec![10, 20, 30],
            vec![0.0, 0.0, -1.0],
            vec![line(0, 1, 1.0), line(1, 2, 1.0)],
            vec![gen(2), gen(1)],
            None,
        )
        .unwrap();
        assert_eq!(g.slack_bus, 1);
        assert_eq!(g.generator_buses(), vec![1, 2]);
        assert_eq!(g.gen_limits()[0], (0.0, 0.0));
    }

    #[test]
    fn rejects_disconnected_network() {
        let err = Grid::new(
            "t",
            vec![1, 2, 3],
            vec![0.0; 3],
            vec![line(0, 1, 1.0)],
            vec![gen(0)],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Disconnected(3, 1)), "{err}");
    }

    #[test]
    fn rejects_zero_reactance_with_index() {
        let err = Grid::new(
            "t",
            vec![1, 2],
            vec![0.0; 2],
            vec![line(0, 1, 1.0), line(1, 0, 0.0)],
            vec![gen(0)],
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nonpositive reactance"));
        assert!(matches!(err, GridError::NonpositiveReactance { index: 1, .. }));
    }

    #[test]
    fn rejects_inverted_bounds() {
        let mut g = gen(0);
        g.u_min = 2.0;
        let err = Grid::new("t", vec![1, 2], vec![0.0; 2], vec![line(0, 1, 1.0)], vec![g], None)
            .unwrap_err();
        assert!(matches!(err, GridError::InvertedGenLimits { index: 0, .. }));

        let mut l = line(0, 1, 1.0);
        l.limits = (1.0, -1.0);
        let err = Grid::new("t", vec![1, 2], vec![0.0; 2], vec![l], vec![gen(0)], None)
            .unwrap_err();
        assert!(matches!(err, GridError::InvertedLineLimits { index: 0, .. }));
    }

    #[test]
    fn rejects_two_units_on_one_bus() {
        let err = Grid::new(
            "t",
            vec![1, 2],
            vec![0.0; 2],
            vec![line(0, 1, 1.0)],
            vec![gen(0), gen(0)],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, GridError::DuplicateGenerator(1)));
    }
}
