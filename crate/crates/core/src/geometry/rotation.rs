use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{FsdError, Result};
use crate::Vec3;

/// Singular values at or below this are treated as zero.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Nearest rotation to an arbitrary 3x3 matrix.
///
/// With `M = U S V^T` (singular values descending), returns
/// `U diag(1, 1, det(U V^T)) V^T`. Fails when fewer than two singular values
/// exceed [`SINGULAR_EPS`], where the nearest rotation is not unique.
pub fn svd_orthogonalize(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(FsdError::invalid("matrix has non-finite entries"));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(FsdError::Degenerate("SVD did not converge".into())),
    };
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    if s[order[1]] <= SINGULAR_EPS {
        return Err(FsdError::Degenerate(format!(
            "rank below 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            s[order[0]], s[order[1]], s[order[2]]
        )));
    }
    let u = Matrix3::from_columns(&[u.column(order[0]), u.column(order[1]), u.column(order[2])]);
    let v_t = Matrix3::from_rows(&[v_t.row(order[0]), v_t.row(order[1]), v_t.row(order[2])]);
    let d = (u * v_t).determinant().signum();
    Ok(u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t)
}

/// Deviation of `r` from SO(3): `(||R^T R - I||_max, |det R - 1|)`.
pub fn so3_residual(r: &Matrix3<f64>) -> (f64, f64) {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    (ortho, (r.determinant() - 1.0).abs())
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let (o, d) = so3_residual(r);
    o <= tol && d <= tol
}

/// Rotation by `angle` radians about a unit `axis`.
pub fn axis_angle(axis: &Vec3, angle: f64) -> Matrix3<f64> {
    let axis = nalgebra::Unit::new_normalize(*axis);
    *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix()
}

/// Uniformly distributed rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q = Quaternion::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    UnitQuaternion::from_quaternion(q)
        .to_rotation_matrix()
        .into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_scaled_identity() {
        let i = Matrix3::identity();
        assert!((svd_orthogonalize(&i).unwrap() - i).abs().max() < 1e-12);
        assert!((svd_orthogonalize(&(i * 2.0)).unwrap() - i).abs().max() < 1e-12);
    }

    #[test]
    fn reflection_is_mapped_to_rotation() {
        let m = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        let r = svd_orthogonalize(&m).unwrap();
        assert!(is_rotation(&r, 1e-9));
    }

    #[test]
    fn rank_one_is_degenerate() {
        let m = Vec3::new(1.0, 2.0, 3.0) * Vec3::new(0.5, -1.0, 2.0).transpose();
        assert!(matches!(
            svd_orthogonalize(&m),
            Err(FsdError::Degenerate(_))
        ));
        assert!(matches!(
            svd_orthogonalize(&Matrix3::zeros()),
            Err(FsdError::Degenerate(_))
        ));
    }

    #[test]
    fn rank_two_is_accepted() {
        let m = Matrix3::from_diagonal(&Vec3::new(3.0, 1.0, 0.0));
        let r = svd_orthogonalize(&m).unwrap();
        assert!((r - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn rotations_are_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = random_rotation(&mut rng);
            assert!((svd_orthogonalize(&r).unwrap() - r).abs().max() < 1e-9);
        }
    }
}
