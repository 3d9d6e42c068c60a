//! JSON case format.
//!
//! ```json
//! {
//!   "name": "case3",
//!   "buses": [{"id": 1, "demand_nominal": 0.0}, ...],
//!   "lines": [{"from": 1, "to": 2, "reactance": 1.0, "limit": 2.5}, ...],
//!   "generators": [{"bus": 1, "u_min": 0.0, "u_max": 0.85, "cost_h": 0.5, "cost_H_diag": 0.2}],
//!   "slack_bus": 1
//! }
//! ```
//!
//! All quantities are per-unit. A missing or `null` limit means unlimited.
//! `slack_bus` is a bus id and is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Generator, Grid, GridError, Line};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub buses: Vec<CaseBus>,
    pub lines: Vec<CaseLine>,
    pub generators: Vec<CaseGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_bus: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseBus {
    pub id: i64,
    pub demand_nominal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseLine {
    pub from: i64,
    pub to: i64,
    pub reactance: f64,
    #[serde(default)]
    pub limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseGenerator {
    pub bus: i64,
    #[serde(default)]
    pub u_min: Option<f64>,
    #[serde(default)]
    pub u_max: Option<f64>,
    #[serde(default)]
    pub cost_h: f64,
    #[serde(rename = "cost_H_diag", default)]
    pub cost_h_diag: f64,
}

/// Parses and validates a JSON case document.
pub fn load_case(source: &str) -> Result<Grid, GridError> {
    let doc: CaseDocument =
        serde_json::from_str(source).map_err(|e| GridError::Schema(e.to_string()))?;
    doc.into_grid()
}

pub fn load_case_file(path: impl AsRef<Path>) -> Result<Grid, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "m") {
        return super::load_matpower(&text, &super::MatpowerOptions::default());
    }
    load_case(&text)
}

impl CaseDocument {
    pub fn into_grid(self) -> Result<Grid, GridError> {
        let ids: Vec<i64> = self.buses.iter().map(|b| b.id).collect();
        let lookup = |element: &'static str, index: usize, id: i64| {
            ids.iter()
                .position(|&b| b == id)
                .ok_or(GridError::UnknownBus {
                    element,
                    index,
                    bus: id,
                })
        };
        let mut lines = Vec::with_capacity(self.lines.len());
        for (index, l) in self.lines.iter().enumerate() {
            let limits = match l.limit {
                Some(lim) if lim < 0.0 => {
                    return Err(GridError::InvertedLineLimits {
                        index,
                        lower: lim,
                        upper: -lim,
                    })
                }
                Some(lim) => (-lim, lim),
                None => (f64::NEG_INFINITY, f64::INFINITY),
            };
            lines.push(Line {
                from: lookup("line", index, l.from)?,
                to: lookup("line", index, l.to)?,
                reactance: l.reactance,
                limits,
            });
        }
        let mut generators = Vec::with_capacity(self.generators.len());
        for (index, g) in self.generators.iter().enumerate() {
            generators.push(Generator {
                bus: lookup("generator", index, g.bus)?,
                u_min: g.u_min.unwrap_or(f64::NEG_INFINITY),
                u_max: g.u_max.unwrap_or(f64::INFINITY),
                cost_linear: g.cost_h,
                cost_quadratic: g.cost_h_diag,
            });
        }
        let slack = match self.slack_bus {
            Some(id) => Some(lookup("slack_bus", 0, id)?),
            None => None,
        };
        Grid::new(
            self.name.unwrap_or_default(),
            ids,
            self.buses.iter().map(|b| b.demand_nominal).collect(),
            lines,
            generators,
            slack,
        )
    }

    /// Serializable view of a grid (inverse of [`CaseDocument::into_grid`]
    /// for symmetric line limits).
    pub fn from_grid(grid: &Grid) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        CaseDocument {
            name: Some(grid.name.clone()),
            notes: None,
            buses: grid
                .bus_ids
                .iter()
                .zip(&grid.nominal_demand)
                .map(|(&id, &d)| CaseBus {
                    id,
                    demand_nominal: d,
                })
                .collect(),
            lines: grid
                .lines
                .iter()
                .map(|l| CaseLine {
                    from: grid.bus_ids[l.from],
                    to: grid.bus_ids[l.to],
                    reactance: l.reactance,
                    limit: finite(l.limits.1),
                })
                .collect(),
            generators: grid
                .generators
                .iter()
                .map(|g| CaseGenerator {
                    bus: grid.bus_ids[g.bus],
                    u_min: finite(g.u_min),
                    u_max: finite(g.u_max),
                    cost_h: g.cost_linear,
                    cost_h_diag: g.cost_quadratic,
                })
                .collect(),
            slack_bus: Some(grid.bus_ids[grid.slack_bus]),
        }
    }
}
