//! Property tests for the geometric and numeric invariants.

use proptest::prelude::*;
use viewplan::nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use viewplan::{
    calibrate, coverage, eval_alpha, merge, noise_ratio, plucker_embed, render_mask, render_ray,
    sample_candidates, score_view, select_nbv, slerp_pose, CameraPose, DepthMap, Gaussian3D,
    GaussianScene, Intrinsics, PointCloud, Ray, RayMode, SearchSpace, SpatialIndex,
    VisibilityMask,
};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(1.0), -std::f64::consts::PI..std::f64::consts::PI).prop_map(|(axis, angle)| {
        let axis = if axis.norm() < 1e-6 { Vector3::z() } else { axis };
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
    })
}

fn pose() -> impl Strategy<Value = CameraPose> {
    (rotation(), vec3(4.0)).prop_map(|(r, c)| CameraPose::new(r, c).unwrap())
}

fn cloud(max_points: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(vec3(3.0), 1..max_points)
        .prop_map(|points| PointCloud::new(points, None).unwrap())
}

proptest! {
    #[test]
    fn slerp_outputs_valid_poses_and_monotone_angle(a in pose(), b in pose(), steps in 3usize..12) {
        let mut prev = 0.0;
        for i in 0..=steps {
            let s = i as f64 / steps as f64;
            let mid = slerp_pose(&a, &b, s).unwrap();
            let gram = mid.rotation().transpose() * mid.rotation();
            prop_assert!((gram - Matrix3::identity()).abs().max() <= 1e-9);
            prop_assert!((mid.rotation().determinant() - 1.0).abs() <= 1e-9);
            let from_a = viewplan::geodesic_angle(a.rotation(), mid.rotation());
            prop_assert!(from_a >= prev - 1e-9, "angle fell from {prev} to {from_a} at s={s}");
            prev = from_a;
        }
    }

    #[test]
    fn plucker_entries_are_valid_lines(
        p in pose(),
        fx in 5.0f64..80.0,
        fy in 5.0f64..80.0,
        mode in prop::bool::ANY,
    ) {
        let intr = Intrinsics::new(fx, fy, 8.0, 8.0, 16, 16).unwrap();
        let mode = if mode { RayMode::Standard } else { RayMode::PointNormalized };
        let img = plucker_embed(std::slice::from_ref(&p), &intr, 6, 6, mode).unwrap();
        for v in 0..6 {
            for u in 0..6 {
                let d = img.direction(0, v, u);
                let m = img.moment(0, v, u);
                prop_assert!((d.norm() - 1.0).abs() <= 1e-9);
                prop_assert!(m.dot(&d).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn candidate_poses_sit_on_the_sphere(seed in any::<u64>(), k in 1usize..8) {
        let center = Vector3::new(0.2, -0.4, 0.5);
        let curr = CameraPose::look_at(
            Vector3::new(2.0, 0.5, 1.5),
            center,
            Vector3::z(),
        ).unwrap();
        let radius = (curr.center() - center).norm();
        let cands = sample_candidates(center, &curr, k, &SearchSpace::default(), seed).unwrap();
        prop_assert_eq!(cands.len(), k);
        for c in &cands {
            prop_assert!(((c.center() - center).norm() - radius).abs() <= 1e-9);
            let gram = c.rotation().transpose() * c.rotation();
            prop_assert!((gram - Matrix3::identity()).abs().max() <= 1e-9);
            prop_assert!((c.rotation().determinant() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn min_distance_matches_brute_force(c in cloud(300), q in vec3(4.0)) {
        let index = SpatialIndex::from_points(c.positions());
        let brute = c.positions().iter().map(|p| {
            let d = q - p;
            (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
        }).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(index.min_distance(&q), brute);
    }

    #[test]
    fn mask_fill_monotone_in_radius(c in cloud(120), r1 in 0.0f64..3.0, r2 in 0.0f64..3.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let intr = Intrinsics::new(12.0, 12.0, 8.0, 8.0, 16, 16).unwrap();
        let pose = CameraPose::look_at(
            Vector3::new(0.0, 0.0, -6.0),
            Vector3::zeros(),
            Vector3::z(),
        ).unwrap();
        let (small, _) = render_mask(&c, &pose, &intr, lo).unwrap();
        let (large, _) = render_mask(&c, &pose, &intr, hi).unwrap();
        prop_assert!(small.fill_ratio() <= large.fill_ratio());
    }

    #[test]
    fn merge_is_union_of_voxel_sets(a in cloud(80), b in cloud(80), voxel in 0.05f64..0.5) {
        let merged = merge(&a, &b, voxel).unwrap();
        let key = |p: &Vector3<f64>| (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        let mut expected: std::collections::HashSet<_> = a.positions().iter().map(key).collect();
        expected.extend(b.positions().iter().map(key));
        let got: std::collections::HashSet<_> = merged.positions().iter().map(key).collect();
        prop_assert_eq!(&got, &expected);
        prop_assert_eq!(merged.len(), expected.len());
    }

    #[test]
    fn nbv_selection_invariant_to_increasing_transforms(
        scores in prop::collection::vec(0.0f64..1000.0, 1..10),
        scale in 0.1f64..10.0,
        shift in -100.0f64..100.0,
    ) {
        let poses: Vec<CameraPose> = (0..scores.len())
            .map(|i| CameraPose::new(Matrix3::identity(), Vector3::new(i as f64, 0.0, 0.0)).unwrap())
            .collect();
        let (idx, _) = select_nbv(&poses, &scores).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| s * scale + shift).collect();
        let (idx2, _) = select_nbv(&poses, &transformed).unwrap();
        prop_assert_eq!(idx, idx2);
    }

    #[test]
    fn ray_compositing_identities(
        centers in prop::collection::vec((vec3(1.5), 0.05f64..1.0, 0.1f64..0.6), 0..12),
    ) {
        let gaussians: Vec<Gaussian3D> = centers.iter().map(|(c, opacity, sigma)| {
            let color = Vector3::new(
                (c.x.abs() / 1.5).min(1.0),
                (c.y.abs() / 1.5).min(1.0),
                (c.z.abs() / 1.5).min(1.0),
            );
            Gaussian3D::isotropic(c + Vector3::new(0.0, 0.0, 3.0), color, *opacity, *sigma).unwrap()
        }).collect();
        let scene = GaussianScene::new(gaussians, Vector3::new(0.2, 0.2, 0.2)).unwrap();
        let ray = Ray::new(Vector3::zeros(), Vector3::z()).unwrap();
        let out = render_ray(&scene, &ray);
        prop_assert!(out.alpha >= 0.0);
        prop_assert!((out.alpha + out.transmittance - 1.0).abs() <= 1e-9);
        for k in 0..3 {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&out.color[k]));
        }
    }

    #[test]
    fn alpha_bounded_by_opacity(opacity in 0.0f64..1.0, sigma in 0.05f64..1.0, p in vec3(2.0)) {
        let g = Gaussian3D::isotropic(Vector3::zeros(), Vector3::zeros(), opacity, sigma).unwrap();
        let a = eval_alpha(&g, &p).unwrap();
        prop_assert!(a >= 0.0 && a <= opacity);
        prop_assert_eq!(eval_alpha(&g, &Vector3::zeros()).unwrap(), opacity);
    }

    #[test]
    fn calibration_compensates_input_rescaling(
        c in 0.2f64..5.0,
        scale in 0.5f64..3.0,
        bias in -0.3f64..0.3,
    ) {
        let base: Vec<f64> = (0..64).map(|i| 0.9 + 0.07 * (i % 8) as f64 + 0.11 * (i / 8) as f64).collect();
        let d_m = DepthMap::new(8, 8, base.clone(), vec![true; 64]).unwrap();
        let d_v = DepthMap::new(
            8, 8,
            base.iter().map(|d| 1.0 / (scale / d + bias).max(0.05)).collect(),
            vec![true; 64],
        ).unwrap();
        let mask = vec![true; 64];
        let fit = calibrate(&d_m, &d_v, &mask).unwrap();
        let d_m_scaled = DepthMap::new(8, 8, base.iter().map(|d| c * d).collect(), vec![true; 64]).unwrap();
        let fit2 = calibrate(&d_m_scaled, &d_v, &mask).unwrap();
        prop_assert!((fit2.scale - c * fit.scale).abs() <= 1e-9 * (1.0 + fit.scale.abs() * c));
        prop_assert!((fit2.bias - fit.bias).abs() <= 1e-9);
        prop_assert!((fit2.residual - fit.residual).abs() <= 1e-9);
    }

    #[test]
    fn cloud_metrics_monotone_in_tau(a in cloud(150), b in cloud(150), t1 in 0.01f64..0.5, t2 in 0.01f64..0.5) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(coverage(&a, &b, lo).unwrap() <= coverage(&a, &b, hi).unwrap());
        prop_assert!(noise_ratio(&a, &b, lo).unwrap() >= noise_ratio(&a, &b, hi).unwrap());
    }

    #[test]
    fn overlap_gate_and_empty_count(filled in prop::collection::vec(prop::bool::ANY, 64..=64)) {
        let mask = VisibilityMask::new(8, 8, filled.clone()).unwrap();
        let n_filled = filled.iter().filter(|&&x| x).count();
        prop_assert_eq!(mask.fill_ratio(), n_filled as f64 / 64.0);
        let score = score_view(&mask, 0.3);
        if mask.fill_ratio() < 0.3 {
            prop_assert_eq!(score, f64::NEG_INFINITY);
        } else {
            prop_assert_eq!(score, (64 - n_filled) as f64);
        }
    }
}
