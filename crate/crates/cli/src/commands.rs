//! Command implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use viewplan::io::{
    read_depth, read_mask_png, read_ply, read_trajectory, save_plan_result, write_depth,
    write_ply, write_png,
};
use viewplan::{
    calibrate, gt_cloud, plan_with_mode, render_image, synthesize_view, GaussianScene,
    PlannerMode, ReconReport, SyntheticOracle,
};

use crate::config::{load_scene, RunConfig};

pub fn cmd_plan(cfg: &RunConfig, mode: PlannerMode) -> Result<()> {
    let scene = load_scene(&cfg.scene)?;
    let start = scene
        .camera_start
        .clone()
        .context("scene has no camera_start; add one to the scene JSON")?
        .pose()?;
    let intr = cfg.intrinsics()?;
    let oracle = SyntheticOracle::new(scene, cfg.noise_model()?);
    let init = oracle.initial_view(&start, &intr)?;

    let t0 = Instant::now();
    let result = plan_with_mode(&oracle, &init, &cfg.planner_config(), mode)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "plan_out".to_string()));
    save_plan_result(&out, &result)?;
    std::fs::write(out.join("run_config.json"), serde_json::to_string_pretty(cfg)?)?;

    let label = match mode {
        PlannerMode::CollisionAware => "planner",
        PlannerMode::Baseline => "baseline",
    };
    for r in &result.reports {
        println!(
            "step {}: candidate {} (fill {:.3}), hinge {:.4} -> {:.4}{}{}",
            r.step,
            r.chosen_index,
            r.fill_ratio,
            r.pre_hinge,
            r.post_hinge,
            if r.optimization_applied { ", optimized" } else { "" },
            if r.expanded_search { ", expanded search" } else { "" },
        );
    }
    println!(
        "{label}: {} segments, {} cloud points, {:.1}s -> {}",
        result.segments.len(),
        result.final_cloud.len(),
        elapsed,
        out.display()
    );
    if result.failed {
        eprintln!(
            "warning: partial result: {}",
            result.failure.as_deref().unwrap_or("unknown failure")
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    pred: &Path,
    gt: &str,
    tau: f64,
    density: f64,
    gt_seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let pred_cloud = read_ply(pred)?;
    let gt_points = if gt.ends_with(".ply") {
        read_ply(Path::new(gt))?
    } else {
        let scene = load_scene(gt)?;
        gt_cloud(&scene, density, gt_seed)?
    };
    let t0 = Instant::now();
    let mut report = ReconReport::evaluate(&pred_cloud, &gt_points, tau, 0.0)?;
    report.runtime = t0.elapsed().as_secs_f64();

    println!("| {:<24} | Coverage (%) | Noise Ratio | F-score@{:.0}cm | Runtime (s) |", "Cloud", tau * 100.0);
    println!(
        "| {:<24} | {:>12.2} | {:>11.4} | {:>12.4} | {:>11.2} |",
        pred.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        report.coverage,
        report.noise_ratio,
        report.fscore,
        report.runtime
    );
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

pub fn cmd_calibrate(
    relative: &Path,
    absolute: &Path,
    mask: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let d_m = read_depth(relative)?;
    let d_v = read_depth(absolute)?;
    let mask = match mask {
        Some(path) => {
            let (mask, w, h) = read_mask_png(path)?;
            if w != d_m.width() || h != d_m.height() {
                bail!("mask {w}x{h} does not match depth {}x{}", d_m.width(), d_m.height());
            }
            mask
        }
        None => vec![true; d_m.values().len()],
    };
    let params = calibrate(&d_m, &d_v, &mask)?;
    println!(
        "scale {:.9}, bias {:.9}, rms residual {:.3e} over {} pixels",
        params.scale, params.bias, params.residual, params.pixels_used
    );
    if let Some(path) = out {
        let record = serde_json::json!({
            "scale": params.scale,
            "bias": params.bias,
            "residual": params.residual,
            "pixels_used": params.pixels_used,
        });
        std::fs::write(path, serde_json::to_string_pretty(&record)?)?;
    }
    Ok(())
}

pub enum RenderMode {
    Gaussians,
    Oracle,
}

pub fn cmd_render(
    mode: RenderMode,
    scene_path: &Path,
    trajectory_path: &Path,
    out: &Path,
    cfg: &RunConfig,
) -> Result<()> {
    let (traj, intr) = read_trajectory(trajectory_path)?;
    std::fs::create_dir_all(out)?;
    let scene_text = std::fs::read_to_string(scene_path)
        .with_context(|| format!("reading scene {}", scene_path.display()))?;
    match mode {
        RenderMode::Gaussians => {
            let scene =
                GaussianScene::from_json(&scene_text, viewplan::nalgebra::Vector3::zeros())?;
            for (i, pose) in traj.poses().iter().enumerate() {
                let rendered = render_image(&scene, pose, &intr)?;
                write_png(&out.join(format!("frame_{i:03}.png")), &rendered.image)?;
                write_depth(&out.join(format!("frame_{i:03}.navd")), &rendered.depth)?;
            }
        }
        RenderMode::Oracle => {
            let scene = viewplan::SyntheticScene::from_json(&scene_text)?;
            let noise = cfg.noise_model()?;
            for (i, pose) in traj.poses().iter().enumerate() {
                let view = synthesize_view(&scene, pose, &intr, noise.as_ref(), i as u64)?;
                write_png(&out.join(format!("frame_{i:03}.png")), &view.image)?;
                write_depth(&out.join(format!("frame_{i:03}.navd")), &view.depth)?;
            }
        }
    }
    println!("rendered {} frames -> {}", traj.len(), out.display());
    Ok(())
}

pub fn cmd_scene_gen(scene: &str, density: f64, seed: u64, out: &Path) -> Result<()> {
    let scene = load_scene(scene)?;
    let cloud = gt_cloud(&scene, density, seed)?;
    write_ply(out, &cloud)?;
    println!("sampled {} ground-truth points -> {}", cloud.len(), out.display());
    Ok(())
}
