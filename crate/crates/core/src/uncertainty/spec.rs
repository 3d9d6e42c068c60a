//! JSON uncertainty spec files.
//!
//! ```json
//! {
//!   "sources": [
//!     {"id": "load3", "bus": 3, "family": "beta",
//!      "params": {"a": 4, "b": 2, "support": [-1.5, -0.9]}},
//!     {"id": "d14", "bus": 14, "family": "gaussian", "rule": "pm15"},
//!     {"id": "d225", "bus": 225, "family": "beta", "params": {"a": 8, "b": 3}, "rule": "pm15"},
//!     {"id": "wind", "pattern": "all_load_buses", "family": "gaussian",
//!      "params": {"mean": 0.0, "std": 0.2}},
//!     {"id": "sin", "bus": 3, "family": "custom",
//!      "params": {"density": "sinusoidal", "support": [-1.9, -0.9]}}
//!   ]
//! }
//! ```
//!
//! `bus` is a bus id. `rule: "pm15"` derives the law from the bus's nominal
//! injection (Gaussian with σ = 5 % of |nominal|, or Beta on ±15 %).
//! Custom densities are `"sinusoidal"` or a table `{"x": [...], "f": [...]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    beta_pm15_spec, gaussian_pm15_spec, Distribution, UncertaintyError, UncertaintySource,
};
use crate::grid::Grid;
use crate::stochastics::CustomDensity;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub sources: Vec<SourceDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDecl {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bus: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternDecl>,
    pub family: Family,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Beta,
    Uniform,
    Gamma,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Pm15,
    #[default]
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternDecl {
    Named(String),
    /// `(bus id, weight)` pairs.
    Weights { weights: Vec<(i64, f64)> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensityDecl {
    Named(String),
    Table { x: Vec<f64>, f: Vec<f64> },
}

pub fn load_uncertainty_spec(source: &str) -> Result<UncertaintySpec, UncertaintyError> {
    serde_json::from_str(source).map_err(|e| UncertaintyError::Schema(e.to_string()))
}

pub fn load_uncertainty_spec_file(
    path: impl AsRef<Path>,
) -> Result<UncertaintySpec, UncertaintyError> {
    load_uncertainty_spec(&std::fs::read_to_string(path)?)
}

impl UncertaintySpec {
    /// Resolves every declaration against `grid`.
    pub fn sources(&self, grid: &Grid) -> Result<Vec<UncertaintySource>, UncertaintyError> {
        self.sources.iter().map(|d| d.resolve(grid)).collect()
    }
}

impl SourceDecl {
    pub fn resolve(&self, grid: &Grid) -> Result<UncertaintySource, UncertaintyError> {
        let invalid = |message: String| UncertaintyError::Invalid {
            id: self.id.clone(),
            message,
        };
        let bus = match self.bus {
            Some(id) => Some(grid.bus_index(id).ok_or(UncertaintyError::UnknownBus(id))?),
            None => None,
        };
        let distribution = match self.rule {
            Rule::Pm15 => {
                let bus = bus.ok_or_else(|| invalid("rule pm15 needs a bus".into()))?;
                let nominal = grid.nominal_demand[bus];
                match self.family {
                    Family::Gaussian => gaussian_pm15_spec(nominal),
                    Family::Beta => beta_pm15_spec(nominal, self.shape_ab()?),
                    other => Err(invalid(format!("rule pm15 is not defined for {other:?}"))),
                }
                .map_err(|e| invalid(e.to_string()))?
            }
            Rule::Explicit => self.explicit()?,
        };
        match (bus, &self.pattern) {
            (Some(bus), None) => UncertaintySource::at_bus(grid, &self.id, bus, distribution),
            (None, Some(PatternDecl::Named(name))) if name == "all_load_buses" => {
                UncertaintySource::all_load_buses(grid, &self.id, distribution)
            }
            (None, Some(PatternDecl::Named(name))) => {
                Err(invalid(format!("unknown pattern '{name}'")))
            }
            (None, Some(PatternDecl::Weights { weights })) => {
                let mut pattern = vec![0.0; grid.n_bus()];
                for &(id, w) in weights {
                    let i = grid.bus_index(id).ok_or(UncertaintyError::UnknownBus(id))?;
                    pattern[i] += w;
                }
                UncertaintySource::with_pattern(&self.id, pattern, distribution)
            }
            _ => Err(invalid("give exactly one of 'bus' and 'pattern'".into())),
        }
    }

    fn shape_ab(&self) -> Result<(f64, f64), UncertaintyError> {
        match (self.params.a, self.params.b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(self.missing("a and b")),
        }
    }

    fn missing(&self, what: &str) -> UncertaintyError {
        UncertaintyError::Invalid {
            id: self.id.clone(),
            message: format!("missing parameter {what}"),
        }
    }

    fn explicit(&self) -> Result<Distribution, UncertaintyError> {
        let p = &self.params;
        let support = || p.support.ok_or_else(|| self.missing("support"));
        Ok(match self.family {
            Family::Gaussian => Distribution::Gaussian {
                mean: p.mean.ok_or_else(|| self.missing("mean"))?,
                std: p.std.ok_or_else(|| self.missing("std"))?,
            },
            Family::Beta => {
                let (a, b) = self.shape_ab()?;
                let (lo, hi) = support()?;
                Distribution::Beta { a, b, lo, hi }
            }
            Family::Uniform => {
                let (lo, hi) = support()?;
                Distribution::Uniform { lo, hi }
            }
            Family::Gamma => Distribution::Gamma {
                shape: p.shape.ok_or_else(|| self.missing("shape"))?,
                loc: p.loc.unwrap_or(0.0),
                scale: p.scale.unwrap_or(1.0),
            },
            Family::Custom => {
                let density = match p.density.as_ref().ok_or_else(|| self.missing("density"))? {
                    DensityDecl::Named(name) if name == "sinusoidal" => CustomDensity::Sinusoidal,
                    DensityDecl::Named(name) => {
                        return Err(UncertaintyError::Invalid {
                            id: self.id.clone(),
                            message: format!("unknown density '{name}'"),
                        })
                    }
                    DensityDecl::Table { x, f } => CustomDensity::Tabulated {
                        x: x.clone(),
                        f: f.clone(),
                    },
                };
                let (lo, hi) = match p.support {
                    Some(s) => s,
                    None => density_support(&density),
                };
                Distribution::Custom { density, lo, hi }
            }
        })
    }
}

fn density_support(d: &CustomDensity) -> (f64, f64) {
    match d {
        CustomDensity::Tabulated { x, .. } if x.len() >= 2 => (x[0], x[x.len() - 1]),
        CustomDensity::Tabulated { .. } => (0.0, 1.0),
        other => other.support(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::assemble_demand;
    use crate::uncertainty::tests::three_bus;

    #[test]
    fn parses_all_forms() {
        let spec = load_uncertainty_spec(
            r#"{"sources": [
                {"id": "load3", "bus": 3, "family": "beta",
                 "params": {"a": 4, "b": 2, "support": [-1.5, -0.9]}},
                {"id": "wind", "pattern": "all_load_buses", "family": "gaussian",
                 "params": {"mean": 0.0, "std": 0.2}},
                {"id": "pv", "pattern": {"weights": [[1, 0.5], [2, 0.5]]}, "family": "uniform",
                 "params": {"support": [0.0, 0.4]}}
            ]}"#,
        )
        .unwrap();
        let g = three_bus();
        let d = assemble_demand(&g, spec.sources(&g).unwrap()).unwrap();
        assert_eq!(d.l(), 3);
        assert!((d.d0()[2] + 1.1).abs() < 1e-14);
        assert!((d.d0()[0] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn pm15_needs_bus_and_family_support() {
        let g = three_bus();
        let spec = load_uncertainty_spec(
            r#"{"sources": [{"id": "x", "bus": 3, "family": "uniform", "rule": "pm15"}]}"#,
        )
        .unwrap();
        assert!(spec.sources(&g).is_err());
        let spec = load_uncertainty_spec(
            r#"{"sources": [{"id": "x", "bus": 3, "family": "gaussian", "rule": "pm15"}]}"#,
        )
        .unwrap();
        let src = &spec.sources(&g).unwrap()[0];
        assert!(matches!(src.distribution, Distribution::Gaussian { mean, std }
            if mean == -1.1 && (std - 0.055).abs() < 1e-15));
    }

    #[test]
    fn unknown_fields_and_buses_fail() {
        assert!(load_uncertainty_spec(r#"{"sources": [], "extra": 1}"#).is_err());
        let spec = load_uncertainty_spec(
            r#"{"sources": [{"id": "x", "bus": 9, "family": "gaussian", "params": {"mean": 0, "std": 1}}]}"#,
        )
        .unwrap();
        assert!(matches!(
            spec.sources(&three_bus()),
            Err(UncertaintyError::UnknownBus(9))
        ));
    }
}
