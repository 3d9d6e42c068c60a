use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::basis::MultivariateBasis;
use super::StochasticsError;

/// Row-major `count × n_ξ` matrix of germ realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct GermSamples {
    pub n_xi: usize,
    pub data: Vec<f64>,
}

impl GermSamples {
    pub fn count(&self) -> usize {
        self.data.len().checked_div(self.n_xi).unwrap_or(0)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_xi..(k + 1) * self.n_xi]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_xi)
    }
}

/// Draws `count` independent germ vectors with a ChaCha8 stream seeded by
/// `seed`; components are drawn in order within each row.
pub fn sample_germ(
    basis: &MultivariateBasis,
    count: usize,
    seed: u64,
) -> Result<GermSamples, StochasticsError> {
    if count == 0 {
        return Err(StochasticsError::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    let n_xi = basis.n_xi();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(count * n_xi);
    for _ in 0..count {
        for c in &basis.components {
            data.push(c.sample(&mut rng));
        }
    }
    Ok(GermSamples { n_xi, data })
}
