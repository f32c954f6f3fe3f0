//! Reconstruction-quality metrics (coverage, noise ratio, F-score at a
//! distance threshold) and camera pose errors after first-frame alignment
//! and scale normalization.

use serde::{Deserialize, Serialize};

use crate::camera::{geodesic_angle, Trajectory};
use crate::cloud::{build_index, PointCloud};
use crate::error::{Error, Result};

/// Point-cloud quality row: coverage percentage, noise fraction, F-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    /// Percentage of ground-truth points with a prediction within tau.
    pub coverage: f64,
    /// Fraction of predictions without a ground-truth point within tau.
    pub noise_ratio: f64,
    /// Harmonic mean of precision (1 - noise) and recall (coverage / 100).
    pub fscore: f64,
    /// Match threshold in meters.
    pub tau: f64,
    /// Wall-clock seconds of the run being evaluated.
    pub runtime: f64,
}

impl ReconReport {
    pub fn evaluate(pred: &PointCloud, gt: &PointCloud, tau: f64, runtime: f64) -> Result<Self> {
        Ok(Self {
            coverage: coverage(pred, gt, tau)?,
            noise_ratio: noise_ratio(pred, gt, tau)?,
            fscore: fscore(pred, gt, tau)?,
            tau,
            runtime,
        })
    }
}

/// Percentage of ground-truth points matched by a prediction within `tau`.
pub fn coverage(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::domain("coverage needs a nonempty ground truth".to_string()));
    }
    if !(tau > 0.0) {
        return Err(Error::domain(format!("tau {tau} must be > 0")));
    }
    let index = build_index(pred);
    let matched = gt.positions().iter().filter(|g| index.min_distance(g) <= tau).count();
    Ok(100.0 * matched as f64 / gt.len() as f64)
}

/// Fraction of predicted points with no ground-truth point within `tau`.
pub fn noise_ratio(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::domain("noise ratio needs a nonempty prediction".to_string()));
    }
    if !(tau > 0.0) {
        return Err(Error::domain(format!("tau {tau} must be > 0")));
    }
    let index = build_index(gt);
    let unmatched = pred.positions().iter().filter(|p| index.min_distance(p) > tau).count();
    Ok(unmatched as f64 / pred.len() as f64)
}

/// F-score at `tau`: harmonic mean of precision and recall; 0 when both
/// vanish.
pub fn fscore(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<f64> {
    let precision = 1.0 - noise_ratio(pred, gt, tau)?;
    let recall = coverage(pred, gt, tau)? / 100.0;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// How per-trajectory translation scale is normalized away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleNorm {
    /// Divide by the mean relative-translation norm (default).
    Mean,
    /// Divide by the median relative-translation norm.
    Median,
}

/// Mean rotation / translation error between two equally long trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseErrorReport {
    /// Mean geodesic rotation error in radians.
    pub r_err: f64,
    /// Mean translation error after scale normalization.
    pub t_err: f64,
}

/// Pose errors with mean-norm scale normalization.
pub fn pose_errors(estimated: &Trajectory, reference: &Trajectory) -> Result<PoseErrorReport> {
    pose_errors_with(estimated, reference, ScaleNorm::Mean)
}

/// Pose errors with a selectable scale normalizer.
///
/// Both trajectories are re-expressed relative to their first frame, their
/// relative translations are divided by that trajectory's norm statistic,
/// and errors are averaged over frames 1..n (frame 0 is the alignment
/// reference and identically zero).
pub fn pose_errors_with(
    estimated: &Trajectory,
    reference: &Trajectory,
    norm: ScaleNorm,
) -> Result<PoseErrorReport> {
    if estimated.len() != reference.len() {
        return Err(Error::domain(format!(
            "trajectory lengths differ: {} vs {}",
            estimated.len(),
            reference.len()
        )));
    }
    let est = relative_to_first(estimated);
    let refr = relative_to_first(reference);
    let est_scale = translation_scale(&est, norm)?;
    let ref_scale = translation_scale(&refr, norm)?;

    let n = est.len() - 1;
    let mut r_sum = 0.0;
    let mut t_sum = 0.0;
    for i in 1..est.len() {
        r_sum += geodesic_angle(&est[i].0, &refr[i].0);
        t_sum += (est[i].1 / est_scale - refr[i].1 / ref_scale).norm();
    }
    Ok(PoseErrorReport { r_err: r_sum / n as f64, t_err: t_sum / n as f64 })
}

type RelPose = (nalgebra::Matrix3<f64>, nalgebra::Vector3<f64>);

fn relative_to_first(traj: &Trajectory) -> Vec<RelPose> {
    let first = traj.first();
    let r0t = first.rotation().transpose();
    traj.poses()
        .iter()
        .map(|p| (r0t * p.rotation(), r0t * (p.center() - first.center())))
        .collect()
}

fn translation_scale(rel: &[RelPose], norm: ScaleNorm) -> Result<f64> {
    let mut norms: Vec<f64> = rel.iter().skip(1).map(|(_, t)| t.norm()).collect();
    let scale = match norm {
        ScaleNorm::Mean => norms.iter().sum::<f64>() / norms.len() as f64,
        ScaleNorm::Median => {
            norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = norms.len() / 2;
            if norms.len() % 2 == 1 {
                norms[m]
            } else {
                (norms[m - 1] + norms[m]) / 2.0
            }
        }
    };
    if scale <= 1e-300 {
        return Err(Error::degenerate(
            "zero translation scale: trajectory never leaves its first center".to_string(),
        ));
    }
    Ok(scale)
}
