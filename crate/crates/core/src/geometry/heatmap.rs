//! Center heatmaps, peak detection and dense embedding lookup.
//!
//! Map coordinates are `(x, y)` with `x` the column and `y` the row.

use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::sdf::LatentCode;

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(FsdError::invalid(format!(
                "{} heatmap values for a {width}x{height} map",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FsdError::invalid("heatmap values must lie in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Gaussian width for an object whose projected diagonal spans `diagonal`
/// grid cells.
pub fn default_sigma(diagonal: f64) -> f64 {
    (diagonal / 6.0).max(1.0)
}

/// `H(p) = max_c exp(-|p - c|^2 / (2 sigma_c^2))`, zero without centers.
pub fn render_heatmap(
    centers: &[(f64, f64)],
    sigmas: &[f64],
    width: usize,
    height: usize,
) -> Result<Heatmap> {
    if centers.len() != sigmas.len() {
        return Err(FsdError::invalid("one sigma per center is required"));
    }
    if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(FsdError::invalid("sigmas must be positive"));
    }
    let mut values = vec![0.0f64; width * height];
    for (&(cx, cy), &sigma) in centers.iter().zip(sigmas) {
        let denom = 2.0 * sigma * sigma;
        for y in 0..height {
            for x in 0..width {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let v = (-d2 / denom).exp();
                let slot = &mut values[y * width + x];
                *slot = slot.max(v);
            }
        }
    }
    Ok(Heatmap {
        width,
        height,
        values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Local maxima above `threshold` in a `window x window` neighborhood.
///
/// A pixel is a peak when it is `>=` every neighbor and strictly greater
/// than any neighbor that precedes it in `(y, x)` order, so plateaus yield
/// their first pixel. Peaks are sorted by descending score, then `(y, x)`.
pub fn extract_peaks(h: &Heatmap, threshold: f64, window: usize) -> Result<Vec<Peak>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FsdError::invalid("threshold must lie in (0, 1)"));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(FsdError::invalid("window must be a positive odd integer"));
    }
    let r = (window / 2) as isize;
    let mut peaks = Vec::new();
    for y in 0..h.height {
        for x in 0..h.width {
            let v = h.get(x, y);
            if v <= threshold {
                continue;
            }
            let mut is_peak = true;
            'scan: for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= h.width as isize || ny >= h.height as isize {
                        continue;
                    }
                    let n = h.get(nx as usize, ny as usize);
                    let before = (dy, dx) < (0, 0);
                    if n > v || (before && n == v) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push(Peak { x, y, score: v });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.y, a.x).cmp(&(b.y, b.x)))
    });
    Ok(peaks)
}

/// Row-major `height x width x channels` feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseEmbeddingMap {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl DenseEmbeddingMap {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || values.len() != width * height * channels {
            return Err(FsdError::invalid(format!(
                "{} values for a {width}x{height}x{channels} map",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.values[i..i + self.channels]
    }
}

pub fn query_map(map: &DenseEmbeddingMap, x: usize, y: usize) -> Result<Vec<f64>> {
    if x >= map.width || y >= map.height {
        return Err(FsdError::invalid(format!(
            "({x}, {y}) outside a {}x{} map",
            map.width, map.height
        )));
    }
    Ok(map.at(x, y).to_vec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectedInstance {
    pub x: usize,
    pub y: usize,
    pub score: f64,
    pub pose_vector: Vec<f64>,
    pub latent: LatentCode,
}

/// Peaks of the heatmap with their pose vector and shape latent.
pub fn detect_instances(
    heatmap: &Heatmap,
    pose_map: &DenseEmbeddingMap,
    shape_map: &DenseEmbeddingMap,
    threshold: f64,
    window: usize,
) -> Result<Vec<DetectedInstance>> {
    for m in [pose_map, shape_map] {
        if m.width != heatmap.width || m.height != heatmap.height {
            return Err(FsdError::invalid(
                "embedding maps must match the heatmap size",
            ));
        }
    }
    extract_peaks(heatmap, threshold, window)?
        .into_iter()
        .map(|p| {
            Ok(DetectedInstance {
                x: p.x,
                y: p.y,
                score: p.score,
                pose_vector: query_map(pose_map, p.x, p.y)?,
                latent: LatentCode::new(query_map(shape_map, p.x, p.y)?)?,
            })
        })
        .collect()
}
