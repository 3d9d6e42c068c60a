//! Orthogonal polynomial germs, the affine tensor basis, exact affine PCEs
//! and germ sampling.

mod basis;
mod germ;
mod pce;
pub mod quadrature;
mod sampling;

pub use basis::{tensorize, MultivariateBasis};
pub use germ::{
    build_germ, inner_product, CustomDensity, DensityFn, GermComponent, GermDescriptor, GermKind,
    INVERSE_CDF_POINTS,
};
pub use pce::{moments, AffinePce};
pub use quadrature::QuadratureRule;
pub use sampling::{sample_germ, GermSamples};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StochasticsError {
    #[error("invalid germ parameter: {0}")]
    InvalidParameter(String),
    #[error("variance must be positive and finite, got {0}")]
    NonpositiveVariance(f64),
    #[error("density not normalized: integrates to {0}")]
    NotNormalized(f64),
    #[error("basis needs at least one germ component")]
    EmptyBasis,
    #[error("no samplable representation for custom density '{0}'")]
    NoSampler(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
