use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::index_poly::{check_dim, IndexSet};

pub const ED_NOISE_AMPLITUDE: f64 = 1e-4;

/// `f(x) = 1 + x₁ − 2x₂ + 3x₁² + 10⁻⁴ x₁²x₂² ε(x)` with `ε` a seeded white-noise
/// field.
///
/// `ε(x)` is a standard normal drawn from a ChaCha8 stream seeded by a hash of
/// the seed and the bit patterns of the coordinates, so every distinct point
/// gets its own variate and repeated queries agree without shared state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdSynthetic {
    pub noise_seed: u64,
}

impl EdSynthetic {
    pub fn new(noise_seed: u64) -> Self {
        EdSynthetic { noise_seed }
    }

    pub fn truth(&self) -> f64 {
        1.0
    }

    /// `{(0,0), (1,0), (0,1), (2,0)}`.
    pub fn true_index_set() -> IndexSet {
        IndexSet::from_tuples(&[&[0, 0], &[1, 0], &[0, 1], &[2, 0]]).expect("valid index set")
    }

    pub fn noise(&self, x: &[f64]) -> f64 {
        let mut h = splitmix(self.noise_seed);
        for c in x {
            h = splitmix(h ^ c.to_bits());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        StandardNormal.sample(&mut rng)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        ed_synthetic_eval(self, x)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn ed_synthetic_eval(prob: &EdSynthetic, x: &[f64]) -> Result<f64> {
    check_dim(2, x.len())?;
    let (x1, x2) = (x[0], x[1]);
    let poly = 1.0 + x1 - 2.0 * x2 + 3.0 * x1 * x1;
    let amp = ED_NOISE_AMPLITUDE * x1 * x1 * x2 * x2;
    if amp == 0.0 {
        return Ok(poly);
    }
    Ok(poly + amp * prob.noise(x))
}
