//! Sweeps planner and baseline across seeds on the shipped scenes and
//! prints per-run coverage/noise, for scene tuning and robustness checks.
//!
//! Usage: cargo run --release -p viewplan --example seed_sweep

use viewplan::*;

fn main() {
    let intr = Intrinsics::from_fov(64, 64, 60.0).unwrap();
    for name in SyntheticScene::builtin_names() {
        let scene = SyntheticScene::builtin(name).unwrap();
        let gt = gt_cloud(&scene, 6400.0, 4242).unwrap();
        let start = scene.camera_start.clone().unwrap().pose().unwrap();
        let oracle = SyntheticOracle::new(scene, None);
        let init = oracle.initial_view(&start, &intr).unwrap();
        for seed in 1u64..=10 {
            let config = PlannerConfig { seed, ..Default::default() };
            let aware = plan(&oracle, &init, &config).unwrap();
            let base = plan_baseline(&oracle, &init, &config).unwrap();
            let ac = coverage(&aware.final_cloud, &gt, 0.02).unwrap();
            let bc = coverage(&base.final_cloud, &gt, 0.02).unwrap();
            let an = noise_ratio(&aware.final_cloud, &gt, 0.02).unwrap();
            let bn = noise_ratio(&base.final_cloud, &gt, 0.02).unwrap();
            println!(
                "{name:<9} seed {seed:>2}: planner {} cov {ac:6.2} noise {an:.4} | baseline cov {bc:6.2} noise {bn:.4} | {}",
                if aware.failed { "FAILED" } else { "ok    " },
                if ac >= bc && an <= bn { "dominates" } else { "LOSES" },
            );
        }
    }
}
