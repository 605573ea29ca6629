use fsd_core::geometry::{
    apply_transform, decode_pose_vector, encode_pose_vector, is_rotation, random_rotation,
    svd_orthogonalize, SimilarityTransform,
};
use fsd_core::losses::{chamfer_thresholded, ChamferConfig, ChamferMode};
use fsd_core::metrics::{
    average_precision, iou3d_monte_carlo, iou_axis_aligned, rotation_error_deg, MatchPredicate,
    OrientedBox3, PoseRecord,
};
use fsd_core::sdf::AnalyticField;
use fsd_core::{Mat3, Vec3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-range..range).prop_map(Vec3::from)
}

fn cloud(max: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(vec3(1.0), 1..max)
}

fn matrix() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-2.0f64..2.0).prop_map(|a| Mat3::from_row_slice(&a))
}

fn rotation() -> impl Strategy<Value = Mat3> {
    any::<u64>().prop_map(|s| random_rotation(&mut ChaCha8Rng::seed_from_u64(s)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chamfer_is_symmetric(a in cloud(60), b in cloud(60), eps in 0.01f64..1.0, hinge in any::<bool>()) {
        let cfg = ChamferConfig {
            epsilon: eps,
            mode: if hinge { ChamferMode::Hinge } else { ChamferMode::ClampedInlier },
        };
        let x = chamfer_thresholded(&a, &b, &cfg).unwrap();
        let y = chamfer_thresholded(&b, &a, &cfg).unwrap();
        prop_assert!((x.value - y.value).abs() <= 1e-12);
        prop_assert_eq!(x.inliers_a_to_b, y.inliers_b_to_a);
    }

    #[test]
    fn chamfer_matches_brute_force(a in cloud(40), b in cloud(40), eps in 0.01f64..1.5) {
        let cfg = ChamferConfig { epsilon: eps, mode: ChamferMode::ClampedInlier };
        let dir = |p: &[Vec3], q: &[Vec3]| {
            let d: Vec<f64> = p
                .iter()
                .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
                .filter(|d| *d < eps)
                .collect();
            if d.is_empty() { 0.0 } else { d.iter().sum::<f64>() / d.len() as f64 }
        };
        let r = chamfer_thresholded(&a, &b, &cfg).unwrap();
        prop_assert!((r.value - (dir(&a, &b) + dir(&b, &a))).abs() <= 1e-12);
    }

    #[test]
    fn orthogonalization_is_scale_invariant(m in matrix(), s in 1e-3f64..1e3) {
        prop_assume!(m.svd(false, false).singular_values.iter().filter(|v| **v > 1e-6).count() >= 2);
        let r = svd_orthogonalize(&m).unwrap();
        prop_assert!(is_rotation(&r, 1e-6));
        let rs = svd_orthogonalize(&(m * s)).unwrap();
        prop_assert!((rs - r).abs().max() <= 1e-9);
    }

    #[test]
    fn orthogonalization_fixes_rotations(r in rotation()) {
        prop_assert!((svd_orthogonalize(&r).unwrap() - r).abs().max() <= 1e-9);
    }

    #[test]
    fn similarity_scales_distances(r in rotation(), s in 0.1f64..10.0, t in vec3(5.0), p in vec3(1.0), q in vec3(1.0)) {
        let tf = SimilarityTransform::new(s, r, t).unwrap();
        let out = apply_transform(&tf, &[p, q]);
        let before = (p - q).norm();
        prop_assert!(((out[0] - out[1]).norm() - s * before).abs() <= 1e-9 * (1.0 + s * before));
    }

    #[test]
    fn pose_vector_round_trip(r in rotation(), log_s in -2.0f64..2.0, t in vec3(3.0)) {
        let tf = SimilarityTransform::new(log_s.exp(), r, t).unwrap();
        let back = decode_pose_vector(&encode_pose_vector(&tf)).unwrap();
        prop_assert!((back.rotation() - r).abs().max() <= 1e-6);
        prop_assert!((back.translation() - t).norm() <= 1e-9);
        prop_assert!((back.scale().ln() - log_s).abs() <= 1e-9);
    }

    #[test]
    fn rotation_error_is_symmetric(a in rotation(), b in rotation()) {
        let x = rotation_error_deg(&a, &b, None).unwrap();
        let y = rotation_error_deg(&b, &a, None).unwrap();
        prop_assert!((x - y).abs() <= 1e-9);
        prop_assert!((0.0..=180.0).contains(&x));
    }

    #[test]
    fn analytic_fields_are_eikonal(p in vec3(1.0), kind in 0usize..3) {
        let f = match kind {
            0 => AnalyticField::sphere(0.5),
            1 => AnalyticField::cuboid([0.4, 0.3, 0.2]),
            _ => AnalyticField::torus(0.5, 0.15),
        }
        .unwrap();
        let g = f.gradient(&p);
        prop_assume!(g.norm() > 0.0);
        prop_assert!((g.norm() - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn monte_carlo_iou_tracks_closed_form(
        ca in vec3(0.3), cb in vec3(0.3),
        ha in prop::array::uniform3(0.1f64..0.5), hb in prop::array::uniform3(0.1f64..0.5),
        seed in any::<u64>(),
    ) {
        let a = OrientedBox3::axis_aligned(ca, ha).unwrap();
        let b = OrientedBox3::axis_aligned(cb, hb).unwrap();
        let n = 20_000;
        let mc = iou3d_monte_carlo(&a, &b, n, seed).unwrap();
        prop_assert!((mc - iou_axis_aligned(&a, &b)).abs() <= 3.0 / (n as f64).sqrt());
        prop_assert_eq!(mc, iou3d_monte_carlo(&b, &a, n, seed).unwrap());
    }
}

fn record(score: f64, x: f64) -> PoseRecord {
    let t = SimilarityTransform::new(1.0, Mat3::identity(), Vec3::new(x, 0.0, 0.0)).unwrap();
    PoseRecord {
        image_id: String::new(),
        category: "c".into(),
        score,
        transform: t,
        bbox: OrientedBox3::new(t, [0.1; 3]).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Predictions either sit on a ground truth (hit) or far away (miss).
    #[test]
    fn ap_is_bounded_and_monotone(
        hits in prop::collection::vec((any::<bool>(), 0.0f64..=1.0), 0..12),
        num_gt in 1usize..8,
        flip in any::<prop::sample::Index>(),
    ) {
        let gts: Vec<PoseRecord> = (0..num_gt).map(|i| record(1.0, i as f64)).collect();
        let predicate = MatchPredicate::Pose { degrees: 5.0, cm: 5.0, symmetry_axis: None };
        // prediction i aims at ground truth i mod num_gt
        let build = |h: &[(bool, f64)]| -> Vec<PoseRecord> {
            h.iter()
                .enumerate()
                .map(|(i, (hit, s))| record(*s, if *hit { (i % num_gt) as f64 } else { 100.0 }))
                .collect()
        };
        let ap = average_precision(&build(&hits), &gts, &predicate).unwrap().mean;
        prop_assert!((0.0..=1.0).contains(&ap));
        let misses: Vec<usize> = (0..hits.len()).filter(|&i| !hits[i].0).collect();
        prop_assume!(!misses.is_empty());
        let mut better = hits.clone();
        better[misses[flip.index(misses.len())]].0 = true;
        let improved = average_precision(&build(&better), &gts, &predicate).unwrap().mean;
        prop_assert!(improved + 1e-12 >= ap, "{} -> {}", ap, improved);
    }
}
