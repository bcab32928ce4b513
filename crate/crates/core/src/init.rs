//! Initial feedforward weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};
use crate::matrix::Matrix;

/// Entries drawn uniformly from `[lo, hi)`.
pub fn uniform_weights(n: usize, m: usize, lo: f64, hi: f64, seed: u64) -> Result<Matrix> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(SimError::InvalidParams("uniform init needs finite lo <= hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Matrix::from_fn(n, m, |_, _| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    }))
}

/// Entries drawn from `N(mean, std^2)`.
pub fn gaussian_weights(n: usize, m: usize, mean: f64, std: f64, seed: u64) -> Result<Matrix> {
    let normal = Normal::new(mean, std)
        .map_err(|_| SimError::InvalidParams("gaussian init needs finite std >= 0".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Matrix::from_fn(n, m, |_, _| normal.sample(&mut rng)))
}
