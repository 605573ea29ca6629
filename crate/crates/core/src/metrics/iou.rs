use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::geometry::SimilarityTransform;
use crate::Vec3;

/// Minimum Monte-Carlo sample count.
pub const MIN_IOU_SAMPLES: usize = 10_000;
const SAMPLE_CHUNK: usize = 4096;

/// Box `[-h, h]` in its own frame, placed by a similarity transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3 {
    pub transform: SimilarityTransform,
    pub half_extents: [f64; 3],
}

impl OrientedBox3 {
    pub fn new(transform: SimilarityTransform, half_extents: [f64; 3]) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(FsdError::invalid("half extents must be positive"));
        }
        Ok(Self {
            transform,
            half_extents,
        })
    }

    pub fn axis_aligned(center: Vec3, half_extents: [f64; 3]) -> Result<Self> {
        Self::new(
            SimilarityTransform::new(1.0, Matrix3::identity(), center)?,
            half_extents,
        )
    }

    pub fn volume(&self) -> f64 {
        let s = self.transform.scale();
        8.0 * s * s * s * self.half_extents.iter().product::<f64>()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let t = &self.transform;
        let local = t.rotation().transpose() * (p - t.translation()) / t.scale();
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }

    /// Uniform point inside the box.
    fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let h = self.half_extents;
        let local = Vec3::new(
            rng.gen_range(-h[0]..=h[0]),
            rng.gen_range(-h[1]..=h[1]),
            rng.gen_range(-h[2]..=h[2]),
        );
        self.transform.apply_point(&local)
    }

    fn is_axis_aligned(&self) -> bool {
        *self.transform.rotation() == Matrix3::identity()
    }

    /// World-frame `(min, max)` corners; only meaningful when axis aligned.
    fn bounds(&self) -> (Vec3, Vec3) {
        let ext = Vec3::from(self.half_extents) * self.transform.scale();
        let c = *self.transform.translation();
        (c - ext, c + ext)
    }

    fn ordering_key(&self) -> [u64; 16] {
        let t = &self.transform;
        let mut key = [0u64; 16];
        key[0] = t.scale().to_bits();
        for (i, v) in t.rotation().iter().enumerate() {
            key[1 + i] = v.to_bits();
        }
        for i in 0..3 {
            key[10 + i] = t.translation()[i].to_bits();
            key[13 + i] = self.half_extents[i].to_bits();
        }
        key
    }
}

/// Exact IoU of two axis-aligned boxes.
pub fn iou_axis_aligned(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let (amin, amax) = a.bounds();
    let (bmin, bmax) = b.bounds();
    let mut inter = 1.0;
    for i in 0..3 {
        inter *= (amax[i].min(bmax[i]) - amin[i].max(bmin[i])).max(0.0);
    }
    let union = a.volume() + b.volume() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn fraction_inside(
    from: &OrientedBox3,
    other: &OrientedBox3,
    samples: usize,
    seed: u64,
    stream: u64,
) -> f64 {
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream * 1_000_003 + c as u64);
            let n = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            (0..n)
                .filter(|_| other.contains(&from.sample(&mut rng)))
                .count()
        })
        .sum();
    hits as f64 / samples as f64
}

/// Monte-Carlo IoU: `samples` uniform points in each box are tested against
/// the other and the two intersection estimates averaged. The boxes are put
/// in a canonical order first so the result is symmetric in its arguments.
pub fn iou3d_monte_carlo(
    a: &OrientedBox3,
    b: &OrientedBox3,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < MIN_IOU_SAMPLES {
        return Err(FsdError::invalid(format!(
            "at least {MIN_IOU_SAMPLES} samples are required"
        )));
    }
    let (a, b) = if a.ordering_key() <= b.ordering_key() {
        (a, b)
    } else {
        (b, a)
    };
    let (va, vb) = (a.volume(), b.volume());
    let inter_a = fraction_inside(a, b, samples, seed, 0) * va;
    let inter_b = fraction_inside(b, a, samples, seed, 1) * vb;
    let inter = 0.5 * (inter_a + inter_b);
    let union = va + vb - inter;
    Ok(if union > 0.0 { inter / union } else { 0.0 })
}

/// IoU of two oriented boxes; exact when both are axis aligned, Monte Carlo
/// otherwise.
pub fn iou3d(a: &OrientedBox3, b: &OrientedBox3, samples: usize, seed: u64) -> Result<f64> {
    if a.is_axis_aligned() && b.is_axis_aligned() {
        Ok(iou_axis_aligned(a, b))
    } else {
        iou3d_monte_carlo(a, b, samples, seed)
    }
}
