//! Command-line entry point for view planning experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use viewplan::PlannerMode;

use commands::RenderMode;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "viewplan", version, about = "Collision-aware view planning over synthetic scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the collision-aware planner and write the result directory.
    Plan(PlanArgs),
    /// Run the no-collision-handling baseline planner.
    BaselinePlan(PlanArgs),
    /// Compare a predicted PLY cloud against ground truth.
    Eval(EvalArgs),
    /// Fit inverse-depth scale/bias between two NAVD depth maps.
    Calibrate(CalibrateArgs),
    /// Render a trajectory through a Gaussian or primitive scene.
    Render(RenderArgs),
    /// Sample a scene's ground-truth surface cloud to PLY.
    SceneGen(SceneGenArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Scene name (room, pillars, corridor) or scene JSON path.
    scene: Option<String>,
    /// Run configuration JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative depth-noise standard deviation for the oracle.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Depth dropout ratio for the oracle.
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted cloud (PLY).
    pred: PathBuf,
    /// Ground truth: a PLY path, or a scene name/path to sample.
    gt: String,
    /// Match threshold in meters.
    #[arg(long, default_value_t = 0.02)]
    tau: f64,
    /// Surface sample density (points per square meter) when sampling a scene.
    #[arg(long, default_value_t = 6400.0)]
    density: f64,
    #[arg(long, default_value_t = 4242)]
    seed: u64,
    /// Write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Relative (monocular-style) depth, NAVD.
    relative: PathBuf,
    /// Absolute depth, NAVD.
    absolute: PathBuf,
    /// Optional PNG mask (luma >= 128 selects pixels).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Write `{scale, bias, residual, pixels_used}` JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Scene JSON: a Gaussian array or a primitive scene, per --mode.
    scene: PathBuf,
    /// Trajectory JSON.
    trajectory: PathBuf,
    /// What the scene file contains.
    #[arg(long, value_parser = ["gaussians", "oracle"], default_value = "oracle")]
    mode: String,
    #[arg(long, default_value = "render_out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args)]
struct SceneGenArgs {
    /// Scene name (room, pillars, corridor) or scene JSON path.
    scene: String,
    #[arg(long, default_value_t = 6400.0)]
    density: f64,
    #[arg(long, default_value_t = 4242)]
    seed: u64,
    #[arg(long, default_value = "gt_cloud.ply")]
    out: PathBuf,
}

fn plan_config(args: &PlanArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(scene) = &args.scene {
        cfg.scene = scene.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.display().to_string());
    }
    if let Some(sigma) = args.noise_sigma {
        cfg.noise_sigma = sigma;
    }
    if let Some(dropout) = args.dropout {
        cfg.dropout = dropout;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Plan(args) => {
            commands::cmd_plan(&plan_config(&args)?, PlannerMode::CollisionAware)
        }
        Command::BaselinePlan(args) => {
            commands::cmd_plan(&plan_config(&args)?, PlannerMode::Baseline)
        }
        Command::Eval(args) => commands::cmd_eval(
            &args.pred,
            &args.gt,
            args.tau,
            args.density,
            args.seed,
            args.out.as_deref(),
        ),
        Command::Calibrate(args) => commands::cmd_calibrate(
            &args.relative,
            &args.absolute,
            args.mask.as_deref(),
            args.out.as_deref(),
        ),
        Command::Render(args) => {
            let mode = match args.mode.as_str() {
                "gaussians" => RenderMode::Gaussians,
                _ => RenderMode::Oracle,
            };
            let mut cfg = RunConfig::default();
            if let Some(seed) = args.seed {
                cfg.noise_seed = seed;
            }
            if let Some(sigma) = args.noise_sigma {
                cfg.noise_sigma = sigma;
            }
            if let Some(dropout) = args.dropout {
                cfg.dropout = dropout;
            }
            commands::cmd_render(mode, &args.scene, &args.trajectory, &args.out, &cfg)
        }
        Command::SceneGen(args) => {
            commands::cmd_scene_gen(&args.scene, args.density, args.seed, &args.out)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(2);
    }
}
