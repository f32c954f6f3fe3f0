//! Collision-aware next-best-view planning: candidate scoring over
//! visibility masks, hinge collision cost with smoothness-regularized
//! trajectory optimization, and the full iterative planning loop that grows
//! the scene cloud one synthesized segment at a time.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{
    interpolate_trajectory, orthonormal_complement, sample_candidates, CameraPose, Intrinsics,
    SearchSpace, Trajectory,
};
use crate::cloud::{back_project, build_index, merge, render_mask, PointCloud, VisibilityMask};
use crate::error::{Error, Result};
use crate::oracle::AnnotatedView;
use crate::spatial::SpatialIndex;

/// Pixel footprint used when rendering candidate visibility masks.
const MASK_POINT_RADIUS: f64 = 1.0;
/// Hinge cost below which a trajectory counts as collision-free.
const HINGE_CONVERGED: f64 = 1e-9;

/// Spatial index plus safety radius; a position collides iff its distance
/// to the indexed cloud is strictly below `r_safe`.
#[derive(Debug, Clone)]
pub struct CollisionDetector {
    index: SpatialIndex,
    r_safe: f64,
}

impl CollisionDetector {
    pub fn new(index: SpatialIndex, r_safe: f64) -> Result<Self> {
        if !(r_safe > 0.0) {
            return Err(Error::domain(format!("safety radius {r_safe} must be > 0")));
        }
        Ok(Self { index, r_safe })
    }

    pub fn from_cloud(cloud: &PointCloud, r_safe: f64) -> Result<Self> {
        Self::new(build_index(cloud), r_safe)
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn r_safe(&self) -> f64 {
        self.r_safe
    }
}

/// True iff the pose's center is within the safety radius of the cloud.
pub fn check_pose(det: &CollisionDetector, pose: &CameraPose) -> bool {
    det.index.min_distance(&pose.center()) < det.r_safe
}

/// True iff any trajectory pose collides.
pub fn check_trajectory(det: &CollisionDetector, traj: &Trajectory) -> bool {
    traj.poses().iter().any(|p| check_pose(det, p))
}

/// Information-gain score of a candidate's visibility mask: the count of
/// empty pixels, gated to -infinity when the filled ratio is below
/// `overlap_min` (too little observed content to anchor synthesis on).
pub fn score_view(mask: &VisibilityMask, overlap_min: f64) -> f64 {
    if mask.fill_ratio() < overlap_min {
        return f64::NEG_INFINITY;
    }
    mask.empty_count() as f64
}

/// Index and pose of the best-scoring candidate; ties break to the lowest
/// index. Errors when every score is -infinity.
pub fn select_nbv(candidates: &[CameraPose], scores: &[f64]) -> Result<(usize, CameraPose)> {
    if candidates.is_empty() || candidates.len() != scores.len() {
        return Err(Error::domain(format!(
            "{} candidates with {} scores",
            candidates.len(),
            scores.len()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    match best {
        Some((i, _)) => Ok((i, candidates[i].clone())),
        None => Err(Error::NoViableCandidate),
    }
}

fn hinge_of_centers(centers: &[Vector3<f64>], index: &SpatialIndex, r_safe: f64) -> f64 {
    centers.iter().map(|c| (r_safe - index.min_distance(c)).max(0.0)).sum()
}

/// Collision risk of a trajectory: sum over poses of
/// max(0, r_safe - distance to cloud).
pub fn hinge_collision_cost(traj: &Trajectory, index: &SpatialIndex, r_safe: f64) -> f64 {
    let centers: Vec<Vector3<f64>> = traj.poses().iter().map(|p| p.center()).collect();
    hinge_of_centers(&centers, index, r_safe)
}

/// Sum of squared center differences between consecutive poses.
pub fn smoothness_cost(traj: &Trajectory) -> f64 {
    traj.poses()
        .windows(2)
        .map(|w| (w[1].center() - w[0].center()).norm_squared())
        .sum()
}

/// Collision-aware trajectory optimization; see
/// [`optimize_trajectory_traced`].
pub fn optimize_trajectory(
    traj: &Trajectory,
    det: &CollisionDetector,
    scene_center: Vector3<f64>,
    lambda: f64,
    opt_step: f64,
    opt_max_iters: usize,
    up: Vector3<f64>,
) -> Result<Trajectory> {
    optimize_trajectory_traced(traj, det, scene_center, lambda, opt_step, opt_max_iters, up)
        .map(|(t, _)| t)
}

/// Gradient descent on the interior camera centers of
/// hinge collision cost + lambda * smoothness, endpoints fixed.
///
/// Steps that would raise the hinge cost are backtracked (halved) until it
/// does not increase, so the hinge trace is non-increasing; descent stops
/// when the hinge cost reaches 1e-9, iterations run out, or no further
/// hinge-safe step exists. Interior rotations are recomputed to look at
/// `scene_center`; a trajectory that is already collision-free is returned
/// unchanged. Returns the trajectory and the per-iteration hinge trace.
pub fn optimize_trajectory_traced(
    traj: &Trajectory,
    det: &CollisionDetector,
    scene_center: Vector3<f64>,
    lambda: f64,
    opt_step: f64,
    opt_max_iters: usize,
    up: Vector3<f64>,
) -> Result<(Trajectory, Vec<f64>)> {
    if lambda < 0.0 || !(opt_step > 0.0) || opt_max_iters == 0 {
        return Err(Error::domain(format!(
            "bad optimizer settings: lambda {lambda}, step {opt_step}, iters {opt_max_iters}"
        )));
    }
    if check_pose(det, traj.first()) || check_pose(det, traj.last()) {
        return Err(Error::domain("trajectory endpoints collide".to_string()));
    }

    let n = traj.len();
    let mut centers: Vec<Vector3<f64>> = traj.poses().iter().map(|p| p.center()).collect();
    let mut trace = vec![hinge_of_centers(&centers, &det.index, det.r_safe)];
    if trace[0] <= HINGE_CONVERGED || n == 2 {
        return Ok((traj.clone(), trace));
    }

    for _ in 0..opt_max_iters {
        let current = *trace.last().unwrap();
        if current <= HINGE_CONVERGED {
            break;
        }
        let mut grad = vec![Vector3::zeros(); n];
        for i in 1..n - 1 {
            let c = centers[i];
            if let Some((nearest, d)) = det.index.nearest(&c) {
                if d < det.r_safe {
                    // Hinge gradient points toward the nearest cloud point;
                    // descend away from it. Subgradient 0 at d == r_safe.
                    let away = if d > 1e-12 {
                        (c - nearest) / d
                    } else {
                        let radial = c - scene_center;
                        if radial.norm() > 1e-12 { radial.normalize() } else { Vector3::z() }
                    };
                    grad[i] -= away;
                }
            }
            grad[i] += (c * 2.0 - centers[i - 1] - centers[i + 1]) * (2.0 * lambda);
        }

        let mut attempt = opt_step;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<Vector3<f64>> = centers
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 || i == n - 1 { *c } else { c - grad[i] * attempt })
                .collect();
            let h = hinge_of_centers(&cand, &det.index, det.r_safe);
            if h <= current {
                centers = cand;
                trace.push(h);
                accepted = true;
                break;
            }
            attempt *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let mut poses = Vec::with_capacity(n);
    poses.push(traj.first().clone());
    for center in centers.iter().take(n - 1).skip(1) {
        poses.push(CameraPose::look_at(*center, scene_center, up)?);
    }
    poses.push(traj.last().clone());
    Ok((Trajectory::new(poses)?, trace))
}

/// Supplies synthesized annotated views for planned segments. The segment
/// index keys deterministic noise streams.
pub trait SceneOracle {
    fn synthesize_segment(
        &self,
        segment: usize,
        traj: &Trajectory,
        intr: &Intrinsics,
    ) -> Result<Vec<AnnotatedView>>;
}

/// Planner parameters; defaults follow the benchmark configuration
/// (N = 3 steps, K = 3 candidates, quarter-sphere search).
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Number of planning iterations (N).
    pub n_steps: usize,
    /// Candidate poses per iteration (K).
    pub k_candidates: usize,
    /// Safety radius in meters.
    pub r_safe: f64,
    /// Smoothness weight in the trajectory cost.
    pub lambda: f64,
    /// Poses per interpolated segment.
    pub frames_per_segment: usize,
    /// Minimum visibility-mask fill ratio for a candidate to be viable.
    pub overlap_min: f64,
    /// Optimizer step size.
    pub opt_step: f64,
    /// Optimizer iteration budget.
    pub opt_max_iters: usize,
    /// Merge deduplication voxel size in meters.
    pub voxel_size: f64,
    pub seed: u64,
    pub search: SearchSpace,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let r_safe = 0.35;
        Self {
            n_steps: 3,
            k_candidates: 3,
            r_safe,
            lambda: 0.5,
            frames_per_segment: 25,
            overlap_min: 0.3,
            opt_step: 0.05 * r_safe,
            opt_max_iters: 500,
            voxel_size: 0.02,
            seed: 0,
            search: SearchSpace::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_candidates == 0 {
            return Err(Error::domain("k_candidates must be >= 1".to_string()));
        }
        if self.frames_per_segment < 2 {
            return Err(Error::domain("frames_per_segment must be >= 2".to_string()));
        }
        if !(self.r_safe > 0.0) || !(self.voxel_size > 0.0) || !(self.opt_step > 0.0) {
            return Err(Error::domain(
                "r_safe, voxel_size, and opt_step must be positive".to_string(),
            ));
        }
        if self.lambda < 0.0 || self.opt_max_iters == 0 {
            return Err(Error::domain("lambda must be >= 0 and opt_max_iters >= 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.overlap_min) {
            return Err(Error::domain(format!("overlap_min {} outside [0, 1]", self.overlap_min)));
        }
        if !(self.search.step_azimuth >= 0.0)
            || !(self.search.step_elevation >= 0.0)
            || !(self.search.azimuth_span >= 0.0)
            || !(self.search.elevation_range.0 <= self.search.elevation_range.1)
            || !(self.search.up.norm() > 1e-9)
        {
            return Err(Error::domain("invalid search space limits".to_string()));
        }
        Ok(())
    }
}

/// Whether collision handling is active; the baseline runs the identical
/// loop with collision checks and trajectory optimization disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerMode {
    CollisionAware,
    Baseline,
}

/// Diagnostics for one planning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    /// Per-candidate scores; `None` marks a collider / gated candidate.
    pub candidate_scores: Vec<Option<f64>>,
    pub chosen_index: usize,
    pub chosen_rotation: [f64; 9],
    pub chosen_center: [f64; 3],
    /// Visibility-mask fill ratio of the chosen view.
    pub fill_ratio: f64,
    pub optimization_applied: bool,
    pub pre_hinge: f64,
    pub post_hinge: f64,
    /// The per-step offset limits were doubled to find a viable candidate.
    pub expanded_search: bool,
}

/// Everything a planning run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub initial_view: AnnotatedView,
    pub initial_cloud: PointCloud,
    pub segments: Vec<Trajectory>,
    /// Synthesized views per segment.
    pub views: Vec<Vec<AnnotatedView>>,
    pub final_cloud: PointCloud,
    pub reports: Vec<StepReport>,
    /// Set when a step had to abort (candidate exhaustion or an
    /// unresolvable collision); the result is then partial.
    pub failed: bool,
    pub failure: Option<String>,
}

/// Moves a pose that newly merged geometry has left inside the safety
/// radius back out to safe clearance, stepping directly away from the
/// nearest cloud point and re-aiming at the scene center.
fn nudge_to_safety(
    pose: &CameraPose,
    det: &CollisionDetector,
    scene_center: Vector3<f64>,
    up: Vector3<f64>,
) -> Option<CameraPose> {
    let mut center = pose.center();
    for _ in 0..32 {
        let Some((nearest, d)) = det.index.nearest(&center) else {
            return Some(pose.clone());
        };
        if d >= det.r_safe {
            return CameraPose::look_at(center, scene_center, up).ok();
        }
        let away = if d > 1e-12 {
            (center - nearest) / d
        } else {
            let radial = center - scene_center;
            if radial.norm() > 1e-12 { radial.normalize() } else { Vector3::z() }
        };
        center += away * (det.r_safe - d + 1e-7);
    }
    None
}

struct CandidateEvaluation {
    candidates: Vec<CameraPose>,
    scores: Vec<f64>,
    fill_ratios: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn evaluate_candidates(
    cloud: &PointCloud,
    curr: &CameraPose,
    det: &CollisionDetector,
    scene_center: Vector3<f64>,
    search: &SearchSpace,
    seed: u64,
    intr: &Intrinsics,
    config: &PlannerConfig,
    mode: PlannerMode,
) -> Result<CandidateEvaluation> {
    let candidates = sample_candidates(scene_center, curr, config.k_candidates, search, seed)?;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut fill_ratios = Vec::with_capacity(candidates.len());
    for cand in &candidates {
        if mode == PlannerMode::CollisionAware && check_pose(det, cand) {
            scores.push(f64::NEG_INFINITY);
            fill_ratios.push(0.0);
            continue;
        }
        let (mask, _) = render_mask(cloud, cand, intr, MASK_POINT_RADIUS)?;
        scores.push(score_view(&mask, config.overlap_min));
        fill_ratios.push(mask.fill_ratio());
    }
    Ok(CandidateEvaluation { candidates, scores, fill_ratios })
}

/// Collision-aware planning loop (see [`plan_with_mode`]).
pub fn plan(
    oracle: &dyn SceneOracle,
    init_view: &AnnotatedView,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    plan_with_mode(oracle, init_view, config, PlannerMode::CollisionAware)
}

/// The comparison baseline: viewpoint utility and smooth interpolation only,
/// no collision checks, no trajectory optimization.
pub fn plan_baseline(
    oracle: &dyn SceneOracle,
    init_view: &AnnotatedView,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    plan_with_mode(oracle, init_view, config, PlannerMode::Baseline)
}

/// Iterative next-best-view planning.
///
/// Starting from the back-projected initial view, each step samples K
/// candidate poses on the orbit sphere, drops colliders, scores the rest by
/// rendered visibility, spherically interpolates to the best one
/// (collision-optimizing the segment if it intersects the cloud),
/// synthesizes views along it, and merges their back-projections into the
/// growing cloud. The scene center is the centroid of the initial cloud.
/// Fully deterministic for a fixed seed.
pub fn plan_with_mode(
    oracle: &dyn SceneOracle,
    init_view: &AnnotatedView,
    config: &PlannerConfig,
    mode: PlannerMode,
) -> Result<PlanResult> {
    config.validate()?;
    let intr = init_view.intrinsics;
    let initial_cloud =
        back_project(&init_view.depth, &init_view.pose, &intr, Some(&init_view.image))?;
    if initial_cloud.is_empty() {
        return Err(Error::domain("initial view yields an empty reference cloud".to_string()));
    }
    let scene_center = initial_cloud.centroid().expect("nonempty cloud");

    let mut search = config.search.clone();
    if search.azimuth_center.is_none() {
        // Anchor the absolute azimuth span at the initial viewpoint.
        let up = search.up.normalize();
        let (e1, e2) = orthonormal_complement(&up);
        let offset = init_view.pose.center() - scene_center;
        search.azimuth_center = Some(offset.dot(&e2).atan2(offset.dot(&e1)));
    }

    let mut result = PlanResult {
        initial_view: init_view.clone(),
        initial_cloud: initial_cloud.clone(),
        segments: Vec::new(),
        views: Vec::new(),
        final_cloud: initial_cloud.clone(),
        reports: Vec::new(),
        failed: false,
        failure: None,
    };

    let mut cloud = initial_cloud;
    let mut curr = init_view.pose.clone();
    let mut detector = CollisionDetector::from_cloud(&cloud, config.r_safe)?;

    for step in 0..config.n_steps {
        // Views merged last step may have revealed geometry inside the
        // safety radius of the pose the camera now sits at; retreat to
        // clearance before planning from it.
        if mode == PlannerMode::CollisionAware && check_pose(&detector, &curr) {
            match nudge_to_safety(&curr, &detector, scene_center, search.up) {
                Some(pose) => curr = pose,
                None => {
                    result.failed = true;
                    result.failure =
                        Some(format!("step {step}: current pose cannot reach safe clearance"));
                    break;
                }
            }
        }
        let step_seed =
            config.seed ^ ((step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut expanded = false;
        let mut eval = evaluate_candidates(
            &cloud, &curr, &detector, scene_center, &search, step_seed, &intr, config, mode,
        )?;
        let mut selection = select_nbv(&eval.candidates, &eval.scores);
        if matches!(selection, Err(Error::NoViableCandidate)) {
            // One-shot fallback: double the per-step offsets and resample.
            expanded = true;
            eval = evaluate_candidates(
                &cloud,
                &curr,
                &detector,
                scene_center,
                &search.expanded(),
                step_seed ^ 0xA5A5_5A5A_0F0F_F0F0,
                &intr,
                config,
                mode,
            )?;
            selection = select_nbv(&eval.candidates, &eval.scores);
        }
        let (chosen_index, nbv) = match selection {
            Ok(sel) => sel,
            Err(Error::NoViableCandidate) => {
                result.failed = true;
                result.failure =
                    Some(format!("step {step}: no viable candidate after search expansion"));
                break;
            }
            Err(e) => return Err(e),
        };

        let mut segment = interpolate_trajectory(&curr, &nbv, config.frames_per_segment)?;
        let pre_hinge = hinge_collision_cost(&segment, detector.index(), config.r_safe);
        let mut post_hinge = pre_hinge;
        let mut optimization_applied = false;
        if mode == PlannerMode::CollisionAware && pre_hinge > 0.0 {
            optimization_applied = true;
            segment = match optimize_trajectory(
                &segment,
                &detector,
                scene_center,
                config.lambda,
                config.opt_step,
                config.opt_max_iters,
                search.up,
            ) {
                Ok(t) => t,
                Err(Error::Domain(msg)) => {
                    result.failed = true;
                    result.failure = Some(format!("step {step}: {msg}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            post_hinge = hinge_collision_cost(&segment, detector.index(), config.r_safe);
            if post_hinge > HINGE_CONVERGED {
                // Safety cannot be certified for this segment; stop rather
                // than emit an unsafe path.
                result.failed = true;
                result.failure = Some(format!(
                    "step {step}: optimization left hinge cost {post_hinge:.3e}"
                ));
                break;
            }
        }

        let views = oracle.synthesize_segment(step, &segment, &intr)?;
        for view in &views {
            let addition = back_project(&view.depth, &view.pose, &intr, Some(&view.image))?;
            cloud = merge(&cloud, &addition, config.voxel_size)?;
        }
        detector = CollisionDetector::from_cloud(&cloud, config.r_safe)?;

        result.reports.push(StepReport {
            step,
            candidate_scores: eval
                .scores
                .iter()
                .map(|&s| s.is_finite().then_some(s))
                .collect(),
            chosen_index,
            chosen_rotation: {
                let r = nbv.rotation();
                [
                    r[(0, 0)], r[(0, 1)], r[(0, 2)],
                    r[(1, 0)], r[(1, 1)], r[(1, 2)],
                    r[(2, 0)], r[(2, 1)], r[(2, 2)],
                ]
            },
            chosen_center: nbv.center().into(),
            fill_ratio: eval.fill_ratios[chosen_index],
            optimization_applied,
            pre_hinge,
            post_hinge,
            expanded_search: expanded,
        });
        result.segments.push(segment);
        result.views.push(views);
        curr = nbv;
    }

    result.final_cloud = cloud;
    Ok(result)
}
