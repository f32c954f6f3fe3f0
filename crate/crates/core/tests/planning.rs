//! End-to-end planning runs on the shipped scenes: determinism, safety,
//! coverage growth, and the planner-vs-baseline comparison.

use viewplan::{
    back_project, coverage, gt_cloud, merge, min_distance, plan, plan_baseline, plan_with_mode,
    Intrinsics, NoiseModel, PlanResult, PlannerConfig, PlannerMode, PointCloud, SyntheticOracle,
    SyntheticScene,
};

const GT_DENSITY: f64 = 6400.0;
const GT_SEED: u64 = 4242;
const TAU: f64 = 0.02;

fn bench_intrinsics() -> Intrinsics {
    Intrinsics::from_fov(64, 64, 60.0).unwrap()
}

fn bench_config(seed: u64) -> PlannerConfig {
    PlannerConfig { seed, ..PlannerConfig::default() }
}

fn run_scene(name: &str, seed: u64, mode: PlannerMode) -> (SyntheticScene, PlanResult) {
    let scene = SyntheticScene::builtin(name).unwrap();
    let start = scene.camera_start.clone().unwrap().pose().unwrap();
    let oracle = SyntheticOracle::new(scene.clone(), None);
    let intr = bench_intrinsics();
    let init = oracle.initial_view(&start, &intr).unwrap();
    let result = plan_with_mode(&oracle, &init, &bench_config(seed), mode).unwrap();
    (scene, result)
}

/// Clouds the planner was holding when each segment was planned
/// (initial cloud, then one merged cloud per completed step).
fn replay_planning_clouds(result: &PlanResult, config: &PlannerConfig) -> Vec<PointCloud> {
    let mut clouds = vec![result.initial_cloud.clone()];
    for views in &result.views {
        let mut cloud = clouds.last().unwrap().clone();
        for view in views {
            let addition =
                back_project(&view.depth, &view.pose, &view.intrinsics, Some(&view.image))
                    .unwrap();
            cloud = merge(&cloud, &addition, config.voxel_size).unwrap();
        }
        clouds.push(cloud);
    }
    clouds
}

#[test]
fn zero_steps_returns_initial_cloud_only() {
    let scene = SyntheticScene::builtin("pillars").unwrap();
    let start = scene.camera_start.clone().unwrap().pose().unwrap();
    let oracle = SyntheticOracle::new(scene, None);
    let init = oracle.initial_view(&start, &bench_intrinsics()).unwrap();
    let config = PlannerConfig { n_steps: 0, ..bench_config(1) };
    let result = plan(&oracle, &init, &config).unwrap();
    assert!(result.segments.is_empty());
    assert!(result.reports.is_empty());
    assert_eq!(result.final_cloud, result.initial_cloud);
    assert!(!result.failed);
}

#[test]
fn planning_is_bitwise_deterministic() {
    let (_, a) = run_scene("pillars", 7, PlannerMode::CollisionAware);
    let (_, b) = run_scene("pillars", 7, PlannerMode::CollisionAware);
    assert_eq!(a, b);
    let (_, c) = run_scene("pillars", 8, PlannerMode::CollisionAware);
    assert_ne!(a, c);
}

#[test]
fn planning_with_noise_is_deterministic() {
    let scene = SyntheticScene::builtin("room").unwrap();
    let start = scene.camera_start.clone().unwrap().pose().unwrap();
    let noise = NoiseModel::new(0.01, 0.05, 99).unwrap();
    let oracle = SyntheticOracle::new(scene, Some(noise));
    let init = oracle.initial_view(&start, &bench_intrinsics()).unwrap();
    let a = plan(&oracle, &init, &bench_config(3)).unwrap();
    let b = plan(&oracle, &init, &bench_config(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn segments_respect_safety_radius() {
    let config = bench_config(1);
    for name in SyntheticScene::builtin_names() {
        for seed in [1u64, 2, 3] {
            let (_, result) = run_scene(name, seed, PlannerMode::CollisionAware);
            assert!(!result.failed, "{name} seed {seed}: {:?}", result.failure);
            let clouds = replay_planning_clouds(&result, &config);
            for (i, segment) in result.segments.iter().enumerate() {
                let index = viewplan::build_index(&clouds[i]);
                for (j, pose) in segment.poses().iter().enumerate() {
                    let d = min_distance(&index, &pose.center());
                    assert!(
                        d >= config.r_safe - 1e-6,
                        "{name} seed {seed} segment {i} pose {j}: distance {d}"
                    );
                }
            }
        }
    }
}

#[test]
fn coverage_monotone_across_steps() {
    let config = bench_config(2);
    let (scene, result) = run_scene("pillars", 2, PlannerMode::CollisionAware);
    let gt = gt_cloud(&scene, GT_DENSITY, GT_SEED).unwrap();
    let clouds = replay_planning_clouds(&result, &config);
    let mut prev = -1.0;
    for cloud in &clouds {
        let cov = coverage(cloud, &gt, TAU).unwrap();
        assert!(cov >= prev, "coverage fell from {prev} to {cov}");
        prev = cov;
    }
    let first = coverage(&clouds[0], &gt, TAU).unwrap();
    assert!(prev > first, "planning never improved coverage ({first} -> {prev})");
}

#[test]
fn optimization_reports_are_consistent() {
    for seed in [1u64, 2, 3] {
        let (_, result) = run_scene("room", seed, PlannerMode::CollisionAware);
        for report in &result.reports {
            assert!(report.post_hinge <= report.pre_hinge + 1e-12);
            if report.optimization_applied {
                assert!(report.post_hinge <= 1e-9);
            } else {
                assert_eq!(report.pre_hinge, report.post_hinge);
            }
        }
    }
}

#[test]
fn baseline_matches_planner_without_obstacles() {
    // Open floor with one centered sphere: candidate shells and chords
    // never collide, so both modes make identical choices.
    let scene = SyntheticScene::from_json(
        r#"{
            "background": [0.0, 0.0, 0.0],
            "plane_half_extent": 4.0,
            "camera_start": {"target": [0.0, 0.0, 0.3], "radius": 2.5,
                             "azimuth_deg": 0.0, "elevation_deg": 25.0},
            "primitives": [
                {"type": "plane", "point": [0.0, 0.0, 0.0],
                 "normal": [0.0, 0.0, 1.0], "color": [0.4, 0.4, 0.4]},
                {"type": "sphere", "center": [0.0, 0.0, 0.5], "radius": 0.5,
                 "color": [0.6, 0.4, 0.3]}
            ]
        }"#,
    )
    .unwrap();
    let start = scene.camera_start.clone().unwrap().pose().unwrap();
    let oracle = SyntheticOracle::new(scene, None);
    let init = oracle.initial_view(&start, &bench_intrinsics()).unwrap();
    let mut config = bench_config(5);
    config.r_safe = 0.2;
    config.search.elevation_range.0 = 10f64.to_radians();
    let aware = plan(&oracle, &init, &config).unwrap();
    let baseline = plan_baseline(&oracle, &init, &config).unwrap();
    assert!(!aware.failed && !baseline.failed);
    assert_eq!(aware.segments, baseline.segments);
    assert_eq!(aware.final_cloud, baseline.final_cloud);
    for report in &aware.reports {
        assert_eq!(report.pre_hinge, 0.0);
    }
    // Planning extends coverage past the initial view.
    let gt = gt_cloud(&oracle.scene, 400.0, GT_SEED).unwrap();
    let initial_cov = coverage(&aware.initial_cloud, &gt, 0.05).unwrap();
    let final_cov = coverage(&aware.final_cloud, &gt, 0.05).unwrap();
    assert!(final_cov > initial_cov, "coverage {initial_cov} -> {final_cov}");
}

#[test]
fn candidate_exhaustion_yields_partial_result() {
    // An overlap gate no view can satisfy: every candidate scores -inf,
    // expansion does not help, and the run flags itself as partial.
    let scene = SyntheticScene::builtin("pillars").unwrap();
    let start = scene.camera_start.clone().unwrap().pose().unwrap();
    let oracle = SyntheticOracle::new(scene, None);
    let init = oracle.initial_view(&start, &bench_intrinsics()).unwrap();
    let config = PlannerConfig { overlap_min: 0.999, ..bench_config(1) };
    let result = plan(&oracle, &init, &config).unwrap();
    assert!(result.failed);
    assert!(result.failure.as_deref().unwrap_or("").contains("no viable candidate"));
    assert!(result.segments.is_empty());
    assert_eq!(result.final_cloud, result.initial_cloud);
}

#[test]
fn planner_beats_baseline_on_shipped_scenes() {
    let mut wins = 0usize;
    let mut runs = 0usize;
    println!("scene      seed  mode       coverage  noise   fscore  hinge>0");
    for name in SyntheticScene::builtin_names() {
        let scene = SyntheticScene::builtin(name).unwrap();
        let gt = gt_cloud(&scene, GT_DENSITY, GT_SEED).unwrap();
        let mut fsum = (0.0f64, 0.0f64);
        for seed in [1u64, 2, 3] {
            let (_, aware) = run_scene(name, seed, PlannerMode::CollisionAware);
            let (_, base) = run_scene(name, seed, PlannerMode::Baseline);
            assert!(!aware.failed, "{name} seed {seed} planner failed: {:?}", aware.failure);
            let a_cov = coverage(&aware.final_cloud, &gt, TAU).unwrap();
            let b_cov = coverage(&base.final_cloud, &gt, TAU).unwrap();
            let a_noise = viewplan::noise_ratio(&aware.final_cloud, &gt, TAU).unwrap();
            let b_noise = viewplan::noise_ratio(&base.final_cloud, &gt, TAU).unwrap();
            let a_f = viewplan::fscore(&aware.final_cloud, &gt, TAU).unwrap();
            let b_f = viewplan::fscore(&base.final_cloud, &gt, TAU).unwrap();
            let a_hinge = aware.reports.iter().filter(|r| r.pre_hinge > 0.0).count();
            let b_hinge = base.reports.iter().filter(|r| r.pre_hinge > 0.0).count();
            println!(
                "{name:<10} {seed:<5} planner   {a_cov:>7.2}  {a_noise:>6.4} {a_f:>7.4}  {a_hinge}"
            );
            println!(
                "{name:<10} {seed:<5} baseline  {b_cov:>7.2}  {b_noise:>6.4} {b_f:>7.4}  {b_hinge}"
            );
            runs += 1;
            if a_cov >= b_cov && a_noise <= b_noise {
                wins += 1;
            }
            fsum.0 += a_f;
            fsum.1 += b_f;
        }
        assert!(
            fsum.0 / 3.0 > fsum.1 / 3.0,
            "{name}: mean F-score {} not above baseline {}",
            fsum.0 / 3.0,
            fsum.1 / 3.0
        );
    }
    assert!(wins * 9 >= runs * 8, "only {wins}/{runs} runs dominated the baseline");
}
