//! Pose and detection evaluation: rotation/translation errors, oriented-box
//! IoU and average precision.

mod ap;
mod iou;

pub use ap::{
    average_precision, evaluate_suite, read_records_jsonl, CategoryAp, MatchPredicate, PoseRecord,
    SuiteConfig, SuiteReport,
};
pub use iou::{iou3d, iou3d_monte_carlo, iou_axis_aligned, OrientedBox3, MIN_IOU_SAMPLES};

use nalgebra::Matrix3;

use crate::error::{FsdError, Result};
use crate::geometry::{axis_angle, is_rotation};
use crate::Vec3;

/// Tolerance for accepting a matrix as a rotation.
pub const ROTATION_INPUT_TOL: f64 = 1e-4;
/// Samples about a symmetry axis.
pub const SYMMETRY_SAMPLES: usize = 360;

fn geodesic_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    // trace(a^T b) summed elementwise so the result is symmetric in a, b
    let mut trace = 0.0;
    for j in 0..3 {
        for i in 0..3 {
            trace += a[(i, j)] * b[(i, j)];
        }
    }
    ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Angle between two rotations in degrees. With a symmetry axis the error is
/// the minimum over rotations of the ground truth about that axis.
pub fn rotation_error_deg(
    r_pred: &Matrix3<f64>,
    r_gt: &Matrix3<f64>,
    symmetry_axis: Option<&Vec3>,
) -> Result<f64> {
    for (name, r) in [("predicted", r_pred), ("ground-truth", r_gt)] {
        if !is_rotation(r, ROTATION_INPUT_TOL) {
            return Err(FsdError::invalid(format!(
                "{name} matrix is not a rotation"
            )));
        }
    }
    let Some(axis) = symmetry_axis else {
        return Ok(geodesic_deg(r_gt, r_pred));
    };
    if !(axis.norm() > 0.0 && axis.iter().all(|v| v.is_finite())) {
        return Err(FsdError::invalid("symmetry axis must be a non-zero vector"));
    }
    Ok((0..SYMMETRY_SAMPLES)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / SYMMETRY_SAMPLES as f64;
            geodesic_deg(&(r_gt * axis_angle(axis, phi)), r_pred)
        })
        .fold(f64::INFINITY, f64::min))
}

pub fn translation_error_cm(t_pred: &Vec3, t_gt: &Vec3) -> f64 {
    100.0 * (t_pred - t_gt).norm()
}
