//! Geometric core for category-level pose, size and shape estimation from
//! latent signed distance fields.

pub mod bench;
pub mod cloud;
pub mod error;
pub mod extract;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod sdf;

pub use error::{FsdError, Result};

/// 3-vector in `f64`, used for points, normals and gradients.
pub type Vec3 = nalgebra::Vector3<f64>;

/// 3x3 matrix in `f64`, used for rotations.
pub type Mat3 = nalgebra::Matrix3<f64>;
