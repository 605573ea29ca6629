use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::rotation::{is_rotation, svd_orthogonalize};
use crate::error::{FsdError, Result};
use crate::Vec3;

/// Number of channels in a pose vector: 9 rotation, 3 translation, 1 log-scale.
pub const POSE_CHANNELS: usize = 13;

/// `p -> s R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformJson", into = "TransformJson")]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct TransformJson {
    scale: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<TransformJson> for SimilarityTransform {
    type Error = FsdError;

    fn try_from(j: TransformJson) -> Result<Self> {
        let r = j.rotation;
        Self::new(
            j.scale,
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vec3::from(j.translation),
        )
    }
}

impl From<SimilarityTransform> for TransformJson {
    fn from(t: SimilarityTransform) -> Self {
        let r = t.rotation;
        TransformJson {
            scale: t.scale,
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: t.translation.into(),
        }
    }
}

impl SimilarityTransform {
    /// Tolerance on `R^T R = I` and `det R = 1`.
    pub const ROTATION_TOL: f64 = 1e-6;

    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(FsdError::invalid(format!("scale {scale} must be positive")));
        }
        if !is_rotation(&rotation, Self::ROTATION_TOL) {
            return Err(FsdError::invalid("rotation is not in SO(3)"));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(FsdError::invalid("translation is not finite"));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    pub fn apply(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| self.apply_point(p)).collect()
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * inner.scale,
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation * self.scale + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let r_t = self.rotation.transpose();
        SimilarityTransform {
            scale: 1.0 / self.scale,
            rotation: r_t,
            translation: -(r_t * self.translation) / self.scale,
        }
    }
}

pub fn apply_transform(transform: &SimilarityTransform, points: &[Vec3]) -> Vec<Vec3> {
    transform.apply(points)
}

/// Decodes a 13-channel pose vector: channels `0..9` are a row-major 3x3
/// matrix orthogonalized into a rotation, `9..12` the translation in meters
/// and `12` the log of the scale.
pub fn decode_pose_vector(v: &[f64]) -> Result<SimilarityTransform> {
    if v.len() != POSE_CHANNELS {
        return Err(FsdError::invalid(format!(
            "pose vector has {} channels, expected {POSE_CHANNELS}",
            v.len()
        )));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(FsdError::invalid("pose vector is not finite"));
    }
    let m = Matrix3::from_row_slice(&v[..9]);
    let rotation = svd_orthogonalize(&m)?;
    let scale = v[12].exp();
    SimilarityTransform::new(scale, rotation, Vec3::new(v[9], v[10], v[11]))
}

/// Inverse of [`decode_pose_vector`] for transforms with an exact rotation.
pub fn encode_pose_vector(t: &SimilarityTransform) -> [f64; POSE_CHANNELS] {
    let mut v = [0.0; POSE_CHANNELS];
    for r in 0..3 {
        for c in 0..3 {
            v[3 * r + c] = t.rotation[(r, c)];
        }
    }
    v[9] = t.translation.x;
    v[10] = t.translation.y;
    v[11] = t.translation.z;
    v[12] = t.scale.ln();
    v
}
