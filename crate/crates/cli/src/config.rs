//! Run configuration: one JSON file plus command-line overrides
//! (flags win over the file, the file wins over defaults).

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use viewplan::{Intrinsics, NoiseModel, PlannerConfig, SyntheticScene};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Scene: a built-in name (room, pillars, corridor) or a JSON path.
    pub scene: String,
    /// Output directory; excluded from the echoed config so reruns into
    /// different directories stay byte-identical.
    #[serde(skip_serializing)]
    pub out: Option<String>,
    pub seed: u64,
    pub n_steps: usize,
    pub k_candidates: usize,
    pub r_safe: f64,
    pub lambda: f64,
    pub frames_per_segment: usize,
    pub overlap_min: f64,
    /// Defaults to 0.05 * r_safe when absent.
    pub opt_step: Option<f64>,
    pub opt_max_iters: usize,
    pub voxel_size: f64,
    pub noise_sigma: f64,
    pub dropout: f64,
    pub noise_seed: u64,
    pub image_size: u32,
    pub fov_deg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        Self {
            scene: "pillars".to_string(),
            out: None,
            seed: planner.seed,
            n_steps: planner.n_steps,
            k_candidates: planner.k_candidates,
            r_safe: planner.r_safe,
            lambda: planner.lambda,
            frames_per_segment: planner.frames_per_segment,
            overlap_min: planner.overlap_min,
            opt_step: None,
            opt_max_iters: planner.opt_max_iters,
            voxel_size: planner.voxel_size,
            noise_sigma: 0.0,
            dropout: 0.0,
            noise_seed: 0,
            image_size: 64,
            fov_deg: 60.0,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            n_steps: self.n_steps,
            k_candidates: self.k_candidates,
            r_safe: self.r_safe,
            lambda: self.lambda,
            frames_per_segment: self.frames_per_segment,
            overlap_min: self.overlap_min,
            opt_step: self.opt_step.unwrap_or(0.05 * self.r_safe),
            opt_max_iters: self.opt_max_iters,
            voxel_size: self.voxel_size,
            seed: self.seed,
            search: Default::default(),
        }
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        Ok(Intrinsics::from_fov(self.image_size, self.image_size, self.fov_deg)?)
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>> {
        if self.noise_sigma == 0.0 && self.dropout == 0.0 {
            return Ok(None);
        }
        Ok(Some(NoiseModel::new(self.noise_sigma, self.dropout, self.noise_seed)?))
    }
}

/// Resolves a scene argument: built-in name first, then a file path.
pub fn load_scene(spec: &str) -> Result<SyntheticScene> {
    if SyntheticScene::builtin_names().contains(&spec) {
        return Ok(SyntheticScene::builtin(spec)?);
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading scene {spec}"))?;
    SyntheticScene::from_json(&text).with_context(|| format!("parsing scene {spec}"))
}
