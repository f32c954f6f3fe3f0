//! Collision-aware next-best-view camera trajectory planning over
//! incrementally growing point clouds, with Plücker ray encoding, an
//! analytic scene oracle, inverse-depth calibration, a forward Gaussian
//! renderer, and reconstruction metrics.
//!
//! The planning loop ([`planner::plan`]) starts from a single annotated
//! view, iteratively samples candidate viewpoints on the orbit sphere,
//! rejects and repairs colliding motions against the current cloud, and
//! merges synthesized views into a growing reconstruction. Every operation
//! is deterministic given its seed.

// Guards written as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use nalgebra;

pub mod calib;
pub mod camera;
pub mod cloud;
pub mod color;
pub mod conditioning;
pub mod error;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod planner;
pub mod spatial;
pub mod splat;

pub use calib::{apply_calibration, calibrate, CalibrationParams};
pub use camera::{
    geodesic_angle, interpolate_trajectory, pixel_ray, plucker_embed, sample_candidates,
    slerp_pose, CameraPose, Intrinsics, PluckerImage, Ray, RayMode, SearchSpace, Trajectory,
};
pub use cloud::{
    back_project, build_index, merge, min_distance, render_mask, DepthMap, PointCloud,
    VisibilityMask,
};
pub use color::ColorImage;
pub use conditioning::{
    convolve, encode_camera, inject, lora_modulate, ConditioningWeights, ConvAdapter, LoraWeights,
    TokenGrid,
};
pub use error::{Error, Result};
pub use metrics::{
    coverage, fscore, noise_ratio, pose_errors, pose_errors_with, PoseErrorReport, ReconReport,
    ScaleNorm,
};
pub use oracle::{
    gt_cloud, raycast, synthesize_view, synthesize_views, AnnotatedView, CameraStart, NoiseModel,
    Primitive, RayHit, SyntheticOracle, SyntheticScene,
};
pub use planner::{
    check_pose, check_trajectory, hinge_collision_cost, optimize_trajectory,
    optimize_trajectory_traced, plan, plan_baseline, plan_with_mode, score_view, select_nbv,
    smoothness_cost, CollisionDetector, PlanResult, PlannerConfig, PlannerMode, SceneOracle,
    StepReport,
};
pub use spatial::SpatialIndex;
pub use splat::{
    drop_gaussians, drop_rate, eval_alpha, l1_depth, l1_rgb, render_image, render_ray,
    DropSchedule, Gaussian3D, GaussianScene, RayRadiance, RenderedImage,
};
