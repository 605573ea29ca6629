//! Closed-form signed distance fields used as exact references for the
//! learned decoder. All shapes are centered at the origin of the canonical
//! cube `[-1, 1]^3`.

use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticField {
    Sphere {
        radius: f64,
    },
    Box {
        half_extents: [f64; 3],
    },
    /// Torus around the y axis.
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
}

impl AnalyticField {
    pub fn sphere(radius: f64) -> Result<Self> {
        Self::Sphere { radius }.validated()
    }

    pub fn cuboid(half_extents: [f64; 3]) -> Result<Self> {
        Self::Box { half_extents }.validated()
    }

    pub fn torus(major_radius: f64, minor_radius: f64) -> Result<Self> {
        Self::Torus {
            major_radius,
            minor_radius,
        }
        .validated()
    }

    /// Checks positivity and that the shape fits in the canonical cube.
    pub fn validated(self) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        let valid = match self {
            Self::Sphere { radius } => ok(radius),
            Self::Box { half_extents } => half_extents.iter().all(|&h| ok(h)),
            Self::Torus {
                major_radius,
                minor_radius,
            } => ok(major_radius) && ok(minor_radius) && major_radius + minor_radius <= 1.0,
        };
        if valid {
            Ok(self)
        } else {
            Err(FsdError::invalid(format!(
                "{self:?}: sizes must be positive and the shape must fit inside [-1,1]^3"
            )))
        }
    }

    pub fn value(&self, p: &Vec3) -> f64 {
        match *self {
            Self::Sphere { radius } => p.norm() - radius,
            Self::Box { half_extents } => {
                let q = Vec3::new(
                    p.x.abs() - half_extents[0],
                    p.y.abs() - half_extents[1],
                    p.z.abs() - half_extents[2],
                );
                let outside = q.sup(&Vec3::zeros()).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            Self::Torus {
                major_radius,
                minor_radius,
            } => {
                let rho = p.x.hypot(p.z) - major_radius;
                rho.hypot(p.y) - minor_radius
            }
        }
    }

    /// Analytic gradient. Returns the zero vector where the gradient is
    /// undefined (sphere center, points on the torus core circle or axis).
    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        match *self {
            Self::Sphere { .. } => {
                let n = p.norm();
                if n > 0.0 {
                    p / n
                } else {
                    Vec3::zeros()
                }
            }
            Self::Box { half_extents } => {
                let sign = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
                let q = Vec3::new(
                    p.x.abs() - half_extents[0],
                    p.y.abs() - half_extents[1],
                    p.z.abs() - half_extents[2],
                );
                let outside = q.sup(&Vec3::zeros());
                let n = outside.norm();
                if n > 0.0 {
                    Vec3::new(
                        sign(p.x) * outside.x,
                        sign(p.y) * outside.y,
                        sign(p.z) * outside.z,
                    ) / n
                } else {
                    let axis = q.imax();
                    let mut g = Vec3::zeros();
                    g[axis] = sign(p[axis]);
                    g
                }
            }
            Self::Torus { major_radius, .. } => {
                let planar = p.x.hypot(p.z);
                if planar == 0.0 {
                    return Vec3::zeros();
                }
                let rho = planar - major_radius;
                let len = rho.hypot(p.y);
                if len == 0.0 {
                    return Vec3::zeros();
                }
                let radial = rho / len;
                Vec3::new(radial * p.x / planar, p.y / len, radial * p.z / planar)
            }
        }
    }
}
