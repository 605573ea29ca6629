use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::Vec3;

/// How inlier pairs contribute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChamferMode {
    /// Mean of `max(0, eps - d)` over inliers.
    /// Note this decreases as matched points move apart.
    Hinge,
    /// Mean nearest-neighbor distance over inliers.
    #[default]
    ClampedInlier,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamferConfig {
    pub epsilon: f64,
    pub mode: ChamferMode,
}

impl Default for ChamferConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            mode: ChamferMode::ClampedInlier,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamferResult {
    pub value: f64,
    pub a_to_b: f64,
    pub b_to_a: f64,
    /// Points of A whose nearest neighbor in B is closer than epsilon.
    pub inliers_a_to_b: usize,
    pub inliers_b_to_a: usize,
}

/// Exact nearest-neighbor distance from every query to `targets`.
pub fn nearest_distances(queries: &[Vec3], targets: &[Vec3]) -> Vec<f64> {
    let coords: Vec<[f64; 3]> = targets.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, u32, 3, 32> = ImmutableKdTree::new_from_slice(&coords);
    queries
        .par_iter()
        .map(|q| {
            tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z])
                .distance
                .sqrt()
        })
        .collect()
}

fn direction(queries: &[Vec3], targets: &[Vec3], cfg: &ChamferConfig) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for d in nearest_distances(queries, targets) {
        if d < cfg.epsilon {
            count += 1;
            sum += match cfg.mode {
                ChamferMode::ClampedInlier => d,
                ChamferMode::Hinge => cfg.epsilon - d,
            };
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// Bidirectional Chamfer distance restricted to pairs closer than epsilon.
/// Each direction is averaged over its own inliers; a direction without
/// inliers contributes zero.
pub fn chamfer_thresholded(a: &[Vec3], b: &[Vec3], cfg: &ChamferConfig) -> Result<ChamferResult> {
    if a.is_empty() || b.is_empty() {
        return Err(FsdError::invalid("chamfer needs two non-empty clouds"));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(FsdError::invalid("epsilon must be positive"));
    }
    let (a_to_b, inliers_a_to_b) = direction(a, b, cfg);
    let (b_to_a, inliers_b_to_a) = direction(b, a, cfg);
    Ok(ChamferResult {
        value: a_to_b + b_to_a,
        a_to_b,
        b_to_a,
        inliers_a_to_b,
        inliers_b_to_a,
    })
}
