use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::geometry::DepthMap;

/// Sensor-like corruption: random holes plus Gaussian depth jitter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthNoise {
    /// Probability that a valid pixel is dropped.
    pub hole_rate: f64,
    /// Standard deviation of the jitter, meters.
    pub gaussian_sigma_m: f64,
    pub seed: u64,
}

pub fn depth_noise(depth: &DepthMap, params: &DepthNoise) -> Result<DepthMap> {
    if !(0.0..1.0).contains(&params.hole_rate) {
        return Err(FsdError::invalid("hole_rate must lie in [0, 1)"));
    }
    if !(params.gaussian_sigma_m >= 0.0 && params.gaussian_sigma_m.is_finite()) {
        return Err(FsdError::invalid("gaussian_sigma_m must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let jitter = Normal::new(0.0, params.gaussian_sigma_m).expect("validated sigma");
    let values = depth
        .values()
        .iter()
        .map(|&d| {
            if d <= 0.0 {
                return d;
            }
            if rng.gen::<f64>() < params.hole_rate {
                return 0.0;
            }
            if params.gaussian_sigma_m == 0.0 {
                d
            } else {
                (d + jitter.sample(&mut rng)).max(0.0)
            }
        })
        .collect();
    DepthMap::new(depth.width(), depth.height(), values)
}
