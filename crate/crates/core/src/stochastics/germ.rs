use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::quadrature::{QuadratureRule, DEFAULT_NODES};
use super::StochasticsError;

/// Points of the inverse-CDF table used to sample custom densities.
pub const INVERSE_CDF_POINTS: usize = 4096;

const NORMALIZATION_TOL: f64 = 1e-8;

/// Closed-form density callable, `pdf(x)` on `support`.
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum CustomDensity {
    /// `f(x) = π/2 · sin(πx)` on `[0, 1]`.
    Sinusoidal,
    /// Piecewise-linear density through the points `(x, f)`.
    Tabulated { x: Vec<f64>, f: Vec<f64> },
    /// Any closed-form density.
    Function {
        label: String,
        support: (f64, f64),
        pdf: DensityFn,
    },
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CustomDensity::Sinusoidal => write!(f, "Sinusoidal"),
            CustomDensity::Tabulated { x, .. } => write!(f, "Tabulated({} points)", x.len()),
            CustomDensity::Function { label, support, .. } => {
                write!(f, "Function({label} on [{}, {}])", support.0, support.1)
            }
        }
    }
}

impl CustomDensity {
    /// Builds a tabulated density, rescaling the values so that the
    /// piecewise-linear interpolant integrates to one.
    pub fn tabulated_normalized(x: Vec<f64>, mut f: Vec<f64>) -> Result<Self, StochasticsError> {
        check_table(&x, &f)?;
        let mass = trapezoid(&x, &f);
        if !(mass > 0.0) {
            return Err(StochasticsError::InvalidParameter(
                "tabulated density has zero mass".into(),
            ));
        }
        f.iter_mut().for_each(|v| *v /= mass);
        Ok(CustomDensity::Tabulated { x, f })
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            CustomDensity::Sinusoidal => (0.0, 1.0),
            CustomDensity::Tabulated { x, .. } => (x[0], x[x.len() - 1]),
            CustomDensity::Function { support, .. } => *support,
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t < lo || t > hi {
            return 0.0;
        }
        match self {
            CustomDensity::Sinusoidal => 0.5 * PI * (PI * t).sin(),
            CustomDensity::Tabulated { x, f } => {
                let k = segment(x, t);
                let w = (t - x[k]) / (x[k + 1] - x[k]);
                f[k] + w * (f[k + 1] - f[k])
            }
            CustomDensity::Function { pdf, .. } => pdf(t),
        }
    }

    /// Lebesgue quadrature on the support, exact for the piecewise-linear
    /// table times polynomials of degree ≤ 6.
    fn lebesgue_rule(&self) -> QuadratureRule {
        match self {
            CustomDensity::Tabulated { x, .. } => {
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for w in x.windows(2) {
                    let piece = QuadratureRule::legendre_on(4, w[0], w[1]);
                    nodes.extend(piece.nodes);
                    weights.extend(piece.weights);
                }
                QuadratureRule { nodes, weights }
            }
            _ => {
                let (lo, hi) = self.support();
                QuadratureRule::legendre_on(DEFAULT_NODES, lo, hi)
            }
        }
    }

    fn cdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t <= lo {
            return 0.0;
        }
        if t >= hi {
            return 1.0;
        }
        match self {
            CustomDensity::Sinusoidal => 0.5 * (1.0 - (PI * t).cos()),
            CustomDensity::Tabulated { x, f } => {
                let k = segment(x, t);
                let head: f64 = (0..k)
                    .map(|j| 0.5 * (x[j + 1] - x[j]) * (f[j] + f[j + 1]))
                    .sum();
                let ft = self.pdf(t);
                head + 0.5 * (t - x[k]) * (f[k] + ft)
            }
            CustomDensity::Function { .. } => QuadratureRule::legendre_on(DEFAULT_NODES, lo, t)
                .integrate(|s| self.pdf(s))
                .clamp(0.0, 1.0),
        }
    }
}

fn check_table(x: &[f64], f: &[f64]) -> Result<(), StochasticsError> {
    if x.len() < 2 || x.len() != f.len() {
        return Err(StochasticsError::InvalidParameter(
            "tabulated density needs at least two (x, f) pairs of equal length".into(),
        ));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(StochasticsError::InvalidParameter(
            "tabulated density abscissae must be strictly increasing".into(),
        ));
    }
    if x.iter().chain(f).any(|v| !v.is_finite()) || f.iter().any(|&v| v < 0.0) {
        return Err(StochasticsError::InvalidParameter(
            "tabulated density must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xs, fs)| 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1]))
        .sum()
}

/// Index `k` with `x[k] ≤ t ≤ x[k+1]`, clamped to the table.
fn segment(x: &[f64], t: f64) -> usize {
    x.partition_point(|&v| v <= t).saturating_sub(1).min(x.len() - 2)
}

#[derive(Debug, Clone)]
pub enum GermKind {
    GaussianStandard,
    Uniform01,
    Beta { a: f64, b: f64 },
    Gamma { shape: f64 },
    Custom(CustomDensity),
}

/// Serializable description of a germ, used in policy and spec files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GermDescriptor {
    GaussianStandard,
    Uniform01,
    Beta { a: f64, b: f64 },
    Gamma { shape: f64 },
    Sinusoidal,
    Tabulated { x: Vec<f64>, f: Vec<f64> },
    /// A closed-form density that cannot be rebuilt from the file; only its
    /// moments are recorded.
    CustomFunction { label: String, mean: f64, variance: f64 },
}

/// One independent scalar germ ξ with its degree-one basis polynomial
/// `ψ₁(ξ) = psi_offset + psi_slope·ξ`.
#[derive(Debug, Clone)]
pub struct GermComponent {
    pub kind: GermKind,
    pub psi_offset: f64,
    pub psi_slope: f64,
    /// `⟨ψ₁, ψ₁⟩`.
    pub gamma1: f64,
    pub mean: f64,
    pub variance: f64,
    inverse_cdf: Option<Arc<Vec<f64>>>,
}

/// Builds a germ component with the basis conventions:
///
/// | family        | ψ₁              | γ₁            |
/// |---------------|-----------------|---------------|
/// | Gaussian      | ξ               | 1             |
/// | Uniform(0,1)  | 2ξ − 1          | 1/3           |
/// | Beta(a,b)     | (a+b)ξ − a      | ab/(a+b+1)    |
/// | Gamma(p)      | p − ξ           | p             |
/// | custom        | ξ − E[ξ]        | Var[ξ]        |
///
/// The Beta row is the Jacobi polynomial `P₁^(b−1,a−1)(2ξ − 1)` and the Gamma
/// row the generalized Laguerre polynomial `L₁^(p−1)(ξ)`.
pub fn build_germ(kind: GermKind) -> Result<GermComponent, StochasticsError> {
    let positive = |name: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(StochasticsError::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )))
        }
    };
    let (psi_offset, psi_slope, gamma1, mean, variance, inverse_cdf) = match &kind {
        GermKind::GaussianStandard => (0.0, 1.0, 1.0, 0.0, 1.0, None),
        GermKind::Uniform01 => (-1.0, 2.0, 1.0 / 3.0, 0.5, 1.0 / 12.0, None),
        GermKind::Beta { a, b } => {
            positive("beta shape a", *a)?;
            positive("beta shape b", *b)?;
            let s = a + b;
            let var = a * b / (s * s * (s + 1.0));
            (-a, s, a * b / (s + 1.0), a / s, var, None)
        }
        GermKind::Gamma { shape } => {
            positive("gamma shape", *shape)?;
            (*shape, -1.0, *shape, *shape, *shape, None)
        }
        GermKind::Custom(density) => {
            let (mean, variance) = custom_moments(density)?;
            let table = match density {
                CustomDensity::Sinusoidal => None,
                _ => Some(Arc::new(inverse_cdf_table(density))),
            };
            (-mean, 1.0, variance, mean, variance, table)
        }
    };
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(StochasticsError::NonpositiveVariance(variance));
    }
    Ok(GermComponent {
        kind,
        psi_offset,
        psi_slope,
        gamma1,
        mean,
        variance,
        inverse_cdf,
    })
}

fn custom_moments(density: &CustomDensity) -> Result<(f64, f64), StochasticsError> {
    let (lo, hi) = density.support();
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(StochasticsError::InvalidParameter(format!(
            "custom density support [{lo}, {hi}] must be a finite interval"
        )));
    }
    if let CustomDensity::Tabulated { x, f } = density {
        check_table(x, f)?;
    }
    let rule = density.lebesgue_rule();
    let mass = rule.integrate(|t| density.pdf(t));
    if !mass.is_finite() || (mass - 1.0).abs() > NORMALIZATION_TOL {
        return Err(StochasticsError::NotNormalized(mass));
    }
    let mean = rule.integrate(|t| t * density.pdf(t));
    let variance = rule.integrate(|t| (t - mean) * (t - mean) * density.pdf(t));
    Ok((mean, variance))
}

/// Quantiles at `k / (INVERSE_CDF_POINTS − 1)` obtained by inverting the CDF
/// evaluated on a uniform grid over the support.
fn inverse_cdf_table(density: &CustomDensity) -> Vec<f64> {
    let (lo, hi) = density.support();
    let n = INVERSE_CDF_POINTS;
    let h = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| lo + h * k as f64).collect();
    let mut cdf = vec![0.0; n];
    for k in 1..n {
        let piece = QuadratureRule::legendre_on(4, grid[k - 1], grid[k]);
        cdf[k] = cdf[k - 1] + piece.integrate(|t| density.pdf(t));
    }
    let total = cdf[n - 1];
    cdf.iter_mut().for_each(|c| *c /= total);
    (0..n)
        .map(|k| {
            let p = k as f64 / (n - 1) as f64;
            let j = cdf.partition_point(|&c| c < p).clamp(1, n - 1);
            let (c0, c1) = (cdf[j - 1], cdf[j]);
            if c1 > c0 {
                grid[j - 1] + (p - c0) / (c1 - c0) * h
            } else {
                grid[j]
            }
        })
        .collect()
}

impl GermComponent {
    pub fn psi1(&self, xi: f64) -> f64 {
        self.psi_offset + self.psi_slope * xi
    }

    /// Support of ξ; infinite ends for unbounded families.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            GermKind::GaussianStandard => (f64::NEG_INFINITY, f64::INFINITY),
            GermKind::Uniform01 | GermKind::Beta { .. } => (0.0, 1.0),
            GermKind::Gamma { .. } => (0.0, f64::INFINITY),
            GermKind::Custom(d) => d.support(),
        }
    }

    /// Gauss rule for the probability measure of ξ.
    pub fn quadrature(&self, nodes: usize) -> QuadratureRule {
        match &self.kind {
            GermKind::GaussianStandard => QuadratureRule::hermite(nodes),
            GermKind::Uniform01 => QuadratureRule::uniform01(nodes),
            GermKind::Beta { a, b } => QuadratureRule::beta(nodes, *a, *b),
            GermKind::Gamma { shape } => QuadratureRule::gamma(nodes, *shape),
            GermKind::Custom(d) => {
                let mut rule = d.lebesgue_rule();
                for (x, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
                    *w *= d.pdf(*x);
                }
                rule
            }
        }
    }

    /// `P(ξ ≤ t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        use statrs::distribution::{Beta, Gamma};
        match &self.kind {
            GermKind::GaussianStandard => Normal::standard().cdf(t),
            GermKind::Uniform01 => t.clamp(0.0, 1.0),
            GermKind::Beta { a, b } => {
                if t <= 0.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    Beta::new(*a, *b).expect("validated shape").cdf(t)
                }
            }
            GermKind::Gamma { shape } => {
                if t <= 0.0 {
                    0.0
                } else {
                    Gamma::new(*shape, 1.0).expect("validated shape").cdf(t)
                }
            }
            GermKind::Custom(d) => d.cdf(t),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            GermKind::GaussianStandard => StandardNormal.sample(rng),
            GermKind::Uniform01 => rng.random::<f64>(),
            GermKind::Beta { a, b } => rand_distr::Beta::new(*a, *b)
                .expect("validated shape")
                .sample(rng),
            GermKind::Gamma { shape } => rand_distr::Gamma::new(*shape, 1.0)
                .expect("validated shape")
                .sample(rng),
            GermKind::Custom(CustomDensity::Sinusoidal) => {
                let u: f64 = rng.random();
                (1.0 - 2.0 * u).acos() / PI
            }
            GermKind::Custom(_) => {
                let table = self.inverse_cdf.as_ref().expect("custom germ has a table");
                let pos = rng.random::<f64>() * (table.len() - 1) as f64;
                let k = (pos as usize).min(table.len() - 2);
                let w = pos - k as f64;
                table[k] + w * (table[k + 1] - table[k])
            }
        }
    }

    pub fn descriptor(&self) -> GermDescriptor {
        match &self.kind {
            GermKind::GaussianStandard => GermDescriptor::GaussianStandard,
            GermKind::Uniform01 => GermDescriptor::Uniform01,
            GermKind::Beta { a, b } => GermDescriptor::Beta { a: *a, b: *b },
            GermKind::Gamma { shape } => GermDescriptor::Gamma { shape: *shape },
            GermKind::Custom(CustomDensity::Sinusoidal) => GermDescriptor::Sinusoidal,
            GermKind::Custom(CustomDensity::Tabulated { x, f }) => GermDescriptor::Tabulated {
                x: x.clone(),
                f: f.clone(),
            },
            GermKind::Custom(CustomDensity::Function { label, .. }) => {
                GermDescriptor::CustomFunction {
                    label: label.clone(),
                    mean: self.mean,
                    variance: self.variance,
                }
            }
        }
    }
}

impl GermDescriptor {
    pub fn to_kind(&self) -> Result<GermKind, StochasticsError> {
        Ok(match self {
            GermDescriptor::GaussianStandard => GermKind::GaussianStandard,
            GermDescriptor::Uniform01 => GermKind::Uniform01,
            GermDescriptor::Beta { a, b } => GermKind::Beta { a: *a, b: *b },
            GermDescriptor::Gamma { shape } => GermKind::Gamma { shape: *shape },
            GermDescriptor::Sinusoidal => GermKind::Custom(CustomDensity::Sinusoidal),
            GermDescriptor::Tabulated { x, f } => GermKind::Custom(CustomDensity::Tabulated {
                x: x.clone(),
                f: f.clone(),
            }),
            GermDescriptor::CustomFunction { label, .. } => {
                return Err(StochasticsError::NoSampler(label.clone()))
            }
        })
    }
}

/// `⟨f, g⟩` under the component's probability measure, by 64-node Gauss
/// quadrature.
pub fn inner_product(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    component: &GermComponent,
) -> f64 {
    component
        .quadrature(DEFAULT_NODES)
        .integrate(|x| f(x) * g(x))
}
