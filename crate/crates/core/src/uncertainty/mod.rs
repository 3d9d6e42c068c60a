//! Uncertainty sources and the affine PCE `d = d₀ + Dψ` of the bus
//! injection vector.
//!
//! A source either sits at one bus, where its random value replaces the
//! bus's nominal injection, or acts through a participation pattern that is
//! added on top of the nominal injections (system-wide wind or solar).

mod spec;

pub use spec::{load_uncertainty_spec, load_uncertainty_spec_file, SourceDecl, UncertaintySpec};

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::stochastics::{
    build_germ, tensorize, AffinePce, CustomDensity, GermComponent, GermKind, StochasticsError,
};

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("no uncertainty sources given")]
    NoSources,
    #[error("duplicate source id '{0}'")]
    DuplicateId(String),
    #[error("bus {0} carries more than one bus source")]
    DuplicateBus(i64),
    #[error("source '{0}' has zero variance")]
    ZeroVariance(String),
    #[error("source '{id}': {message}")]
    Invalid { id: String, message: String },
    #[error("nominal value must be nonzero")]
    ZeroNominal,
    #[error("unknown bus id {0}")]
    UnknownBus(i64),
    #[error("uncertainty spec is not valid: {0}")]
    Schema(String),
    #[error("failed to read uncertainty spec: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Stochastics(#[from] StochasticsError),
}

/// Marginal law of one source, in physical (per-unit) units.
#[derive(Debug, Clone)]
pub enum Distribution {
    Gaussian { mean: f64, std: f64 },
    /// Beta(a, b) stretched onto `[lo, hi]`.
    Beta { a: f64, b: f64, lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `loc + scale·Gamma(shape, 1)`.
    Gamma { shape: f64, loc: f64, scale: f64 },
    /// Custom germ density mapped affinely from its own support onto
    /// `[lo, hi]`.
    Custom { density: CustomDensity, lo: f64, hi: f64 },
}

impl Distribution {
    pub fn germ_kind(&self) -> GermKind {
        match self {
            Distribution::Gaussian { .. } => GermKind::GaussianStandard,
            Distribution::Beta { a, b, .. } => GermKind::Beta { a: *a, b: *b },
            Distribution::Uniform { .. } => GermKind::Uniform01,
            Distribution::Gamma { shape, .. } => GermKind::Gamma { shape: *shape },
            Distribution::Custom { density, .. } => GermKind::Custom(density.clone()),
        }
    }

    /// `(offset, scale)` with `y = offset + scale·ξ`.
    pub fn germ_affine(&self) -> (f64, f64) {
        match self {
            Distribution::Gaussian { mean, std } => (*mean, *std),
            Distribution::Beta { lo, hi, .. } | Distribution::Uniform { lo, hi } => {
                (*lo, hi - lo)
            }
            Distribution::Gamma { loc, scale, .. } => (*loc, *scale),
            Distribution::Custom { density, lo, hi } => {
                let (g_lo, g_hi) = density.support();
                let scale = (hi - lo) / (g_hi - g_lo);
                (lo - scale * g_lo, scale)
            }
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Distribution::Gaussian { .. })
    }

    /// Physical support `[lo, hi]` (infinite for unbounded families).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Distribution::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::Beta { lo, hi, .. }
            | Distribution::Uniform { lo, hi }
            | Distribution::Custom { lo, hi, .. } => (*lo, *hi),
            Distribution::Gamma { loc, scale, .. } => {
                if *scale >= 0.0 {
                    (*loc, f64::INFINITY)
                } else {
                    (f64::NEG_INFINITY, *loc)
                }
            }
        }
    }
}

/// Gaussian whose ±3σ interval covers ±15 % of `nominal`.
pub fn gaussian_pm15_spec(nominal: f64) -> Result<Distribution, UncertaintyError> {
    if nominal == 0.0 || !nominal.is_finite() {
        return Err(UncertaintyError::ZeroNominal);
    }
    Ok(Distribution::Gaussian {
        mean: nominal,
        std: 0.05 * nominal.abs(),
    })
}

/// Beta(a, b) on the ±15 % interval around `nominal`, ordered so that
/// `lo < hi` for negative nominals too.
pub fn beta_pm15_spec(nominal: f64, shape: (f64, f64)) -> Result<Distribution, UncertaintyError> {
    if nominal == 0.0 || !nominal.is_finite() {
        return Err(UncertaintyError::ZeroNominal);
    }
    let (x, y) = (0.85 * nominal, 1.15 * nominal);
    Ok(Distribution::Beta {
        a: shape.0,
        b: shape.1,
        lo: x.min(y),
        hi: x.max(y),
    })
}

#[derive(Debug, Clone)]
pub struct UncertaintySource {
    pub id: String,
    pub distribution: Distribution,
    /// Bus injection per unit of the source's random value.
    pub injection_pattern: Vec<f64>,
    /// Contribution of this source to `d₀`.
    pub offset: Vec<f64>,
    /// Bus position for single-bus sources.
    pub bus: Option<usize>,
}

impl UncertaintySource {
    /// Source whose value is the injection of `bus` (replacing its nominal).
    pub fn at_bus(
        grid: &Grid,
        id: impl Into<String>,
        bus: usize,
        distribution: Distribution,
    ) -> Result<Self, UncertaintyError> {
        let id = id.into();
        let n = grid.n_bus();
        if bus >= n {
            return Err(UncertaintyError::Invalid {
                id,
                message: format!("bus position {bus} out of range"),
            });
        }
        let mut pattern = vec![0.0; n];
        pattern[bus] = 1.0;
        let mean = distribution_mean(&id, &distribution)?;
        let mut offset = vec![0.0; n];
        offset[bus] = mean - grid.nominal_demand[bus];
        Ok(UncertaintySource {
            id,
            distribution,
            injection_pattern: pattern,
            offset,
            bus: Some(bus),
        })
    }

    /// Source acting through `pattern`, added to the nominal injections.
    pub fn with_pattern(
        id: impl Into<String>,
        pattern: Vec<f64>,
        distribution: Distribution,
    ) -> Result<Self, UncertaintyError> {
        let id = id.into();
        if pattern.iter().any(|v| !v.is_finite()) || pattern.iter().all(|&v| v == 0.0) {
            return Err(UncertaintyError::Invalid {
                id,
                message: "injection pattern must be finite with a nonzero entry".into(),
            });
        }
        let mean = distribution_mean(&id, &distribution)?;
        let offset = pattern.iter().map(|p| p * mean).collect();
        Ok(UncertaintySource {
            id,
            distribution,
            injection_pattern: pattern,
            offset,
            bus: None,
        })
    }

    /// Uniform participation over buses with negative nominal injection.
    pub fn all_load_buses(
        grid: &Grid,
        id: impl Into<String>,
        distribution: Distribution,
    ) -> Result<Self, UncertaintyError> {
        let loads = grid.nominal_demand.iter().filter(|&&d| d < 0.0).count();
        let id = id.into();
        if loads == 0 {
            return Err(UncertaintyError::Invalid {
                id,
                message: "grid has no load buses".into(),
            });
        }
        let pattern = grid
            .nominal_demand
            .iter()
            .map(|&d| if d < 0.0 { 1.0 / loads as f64 } else { 0.0 })
            .collect();
        Self::with_pattern(id, pattern, distribution)
    }
}

fn distribution_mean(id: &str, d: &Distribution) -> Result<f64, UncertaintyError> {
    let germ = build_germ(d.germ_kind()).map_err(|e| UncertaintyError::Invalid {
        id: id.to_string(),
        message: e.to_string(),
    })?;
    let (offset, scale) = d.germ_affine();
    if !(offset.is_finite() && scale.is_finite()) {
        return Err(UncertaintyError::Invalid {
            id: id.to_string(),
            message: "non-finite distribution parameter".into(),
        });
    }
    Ok(offset + scale * germ.mean)
}

/// `d = d₀ + Dψ` with one basis column per source.
#[derive(Debug, Clone)]
pub struct DemandPce {
    pub pce: AffinePce,
    /// `source_ids[ℓ − 1]` labels basis column `ℓ`.
    pub source_ids: Vec<String>,
    pub sources: Vec<UncertaintySource>,
}

impl DemandPce {
    pub fn d0(&self) -> &[f64] {
        &self.pce.x0
    }

    /// Row-major `N × L` matrix `D`.
    pub fn d_matrix(&self) -> &[f64] {
        &self.pce.coeffs
    }

    pub fn l(&self) -> usize {
        self.pce.l()
    }

    pub fn all_gaussian(&self) -> bool {
        self.sources.iter().all(|s| s.distribution.is_gaussian())
    }

    /// `Σ_i d_{iℓ}` for `ℓ = 0..=L`.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.pce.dim();
        let l = self.l();
        let mut sums = vec![0.0; l + 1];
        for i in 0..n {
            sums[0] += self.pce.x0[i];
            for k in 0..l {
                sums[k + 1] += self.pce.coeffs[i * l + k];
            }
        }
        sums
    }

    /// The deterministic expansion `d = nominal` (no random term) over a
    /// single dummy Gaussian germ, used for degenerate runs.
    pub fn deterministic(grid: &Grid) -> Self {
        let basis = Arc::new(tensorize(vec![build_germ(GermKind::GaussianStandard).unwrap()]).unwrap());
        let n = grid.n_bus();
        DemandPce {
            pce: AffinePce::new(grid.nominal_demand.clone(), vec![0.0; n], basis).unwrap(),
            source_ids: vec!["none".into()],
            sources: Vec::new(),
        }
    }
}

/// Tensorizes the sources' germs and stacks their contributions.
pub fn assemble_demand(
    grid: &Grid,
    sources: Vec<UncertaintySource>,
) -> Result<DemandPce, UncertaintyError> {
    if sources.is_empty() {
        return Err(UncertaintyError::NoSources);
    }
    let n = grid.n_bus();
    let mut ids = HashSet::new();
    let mut buses = HashSet::new();
    let mut components: Vec<GermComponent> = Vec::with_capacity(sources.len());
    for s in &sources {
        if !ids.insert(s.id.clone()) {
            return Err(UncertaintyError::DuplicateId(s.id.clone()));
        }
        if let Some(bus) = s.bus {
            if !buses.insert(bus) {
                return Err(UncertaintyError::DuplicateBus(grid.bus_ids[bus]));
            }
        }
        if s.injection_pattern.len() != n || s.offset.len() != n {
            return Err(UncertaintyError::Invalid {
                id: s.id.clone(),
                message: format!("pattern length differs from bus count {n}"),
            });
        }
        let germ = match build_germ(s.distribution.germ_kind()) {
            Ok(g) => g,
            Err(StochasticsError::NonpositiveVariance(_)) => {
                return Err(UncertaintyError::ZeroVariance(s.id.clone()))
            }
            Err(e) => {
                return Err(UncertaintyError::Invalid {
                    id: s.id.clone(),
                    message: e.to_string(),
                })
            }
        };
        let (_, scale) = s.distribution.germ_affine();
        if scale == 0.0 {
            return Err(UncertaintyError::ZeroVariance(s.id.clone()));
        }
        components.push(germ);
    }

    let l = sources.len();
    let mut d0 = grid.nominal_demand.clone();
    let mut d = vec![0.0; n * l];
    for (k, (s, germ)) in sources.iter().zip(&components).enumerate() {
        // y = offset + scale·ξ = offset + scale·(ψ₁ − a)/b
        let (_, scale) = s.distribution.germ_affine();
        let slope = scale / germ.psi_slope;
        for i in 0..n {
            d0[i] += s.offset[i];
            d[i * l + k] = s.injection_pattern[i] * slope;
        }
    }
    let basis = Arc::new(tensorize(components)?);
    Ok(DemandPce {
        pce: AffinePce::new(d0, d, basis)?,
        source_ids: sources.iter().map(|s| s.id.clone()).collect(),
        sources,
    })
}

/// Physical parameters of a source as written to reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceSummary {
    pub id: String,
    pub bus: Option<i64>,
    pub mean: f64,
    pub std: f64,
}

impl DemandPce {
    pub fn summaries(&self, grid: &Grid) -> Vec<SourceSummary> {
        self.sources
            .iter()
            .zip(&self.pce.basis.components)
            .map(|(s, g)| {
                let (offset, scale) = s.distribution.germ_affine();
                SourceSummary {
                    id: s.id.clone(),
                    bus: s.bus.map(|b| grid.bus_ids[b]),
                    mean: offset + scale * g.mean,
                    std: scale.abs() * g.variance.sqrt(),
                }
            })
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grid::{Generator, Line};

    pub(crate) fn three_bus() -> Grid {
        let line = |from, to| Line {
            from,
            to,
            reactance: 1.0,
            limits: (f64::NEG_INFINITY, f64::INFINITY),
        };
        let gen = |bus, u_max| Generator {
            bus,
            u_min: f64::NEG_INFINITY,
            u_max,
            cost_linear: 0.5,
            cost_quadratic: 0.2,
        };
        Grid::new(
            "t3",
            vec![1, 2, 3],
            vec![0.0, 0.0, -1.1],
            vec![line(0, 1), line(1, 2), line(0, 2)],
            vec![gen(0, 0.85), gen(1, f64::INFINITY)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn beta_source_on_bus_three() {
        let g = three_bus();
        let src = UncertaintySource::at_bus(
            &g,
            "load3",
            2,
            Distribution::Beta {
                a: 4.0,
                b: 2.0,
                lo: -1.5,
                hi: -0.9,
            },
        )
        .unwrap();
        let d = assemble_demand(&g, vec![src]).unwrap();
        assert_eq!(d.l(), 1);
        for (got, want) in d.d0().iter().zip([0.0, 0.0, -1.1]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!((d.d_matrix()[2] - 0.1).abs() < 1e-14);
        assert_eq!(&d.d_matrix()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn sinusoidal_source_on_bus_three() {
        let g = three_bus();
        let src = UncertaintySource::at_bus(
            &g,
            "load3",
            2,
            Distribution::Custom {
                density: CustomDensity::Sinusoidal,
                lo: -1.9,
                hi: -0.9,
            },
        )
        .unwrap();
        let d = assemble_demand(&g, vec![src]).unwrap();
        assert!((d.d0()[2] + 1.4).abs() < 1e-12);
        assert!((d.d_matrix()[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pm15_rules() {
        match gaussian_pm15_spec(-2.0).unwrap() {
            Distribution::Gaussian { mean, std } => {
                assert_eq!(mean, -2.0);
                assert!((std - 0.1).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        assert!(gaussian_pm15_spec(0.0).is_err());
        match beta_pm15_spec(-2.0, (8.0, 3.0)).unwrap() {
            Distribution::Beta { lo, hi, .. } => {
                assert!((lo + 2.3).abs() < 1e-12 && (hi + 1.7).abs() < 1e-12)
            }
            _ => unreachable!(),
        }
        assert!(beta_pm15_spec(0.0, (1.0, 1.0)).is_err());
    }

    #[test]
    fn rejects_duplicates_and_degenerate_sources() {
        let g = three_bus();
        let s = |id: &str, std| {
            UncertaintySource::at_bus(&g, id, 2, Distribution::Gaussian { mean: -1.0, std })
                .unwrap()
        };
        assert!(matches!(
            assemble_demand(&g, vec![s("a", 0.1), s("a", 0.1)]),
            Err(UncertaintyError::DuplicateId(_))
        ));
        assert!(matches!(
            assemble_demand(&g, vec![s("a", 0.1), s("b", 0.1)]),
            Err(UncertaintyError::DuplicateBus(3))
        ));
        assert!(matches!(
            assemble_demand(&g, vec![s("a", 0.0)]),
            Err(UncertaintyError::ZeroVariance(_))
        ));
        assert!(matches!(assemble_demand(&g, vec![]), Err(UncertaintyError::NoSources)));
    }

    #[test]
    fn pattern_source_adds_to_nominal() {
        let g = three_bus();
        let wind = UncertaintySource::all_load_buses(
            &g,
            "wind",
            Distribution::Gaussian { mean: 0.2, std: 0.3 },
        )
        .unwrap();
        let d = assemble_demand(&g, vec![wind]).unwrap();
        assert!((d.d0()[2] + 0.9).abs() < 1e-14);
        assert!((d.d_matrix()[2] - 0.3).abs() < 1e-14);
    }
}
