//! Camera geometry: intrinsics, rigid poses, per-pixel rays, Plücker ray
//! images, pose interpolation, and spherical candidate sampling.
//!
//! Conventions: poses are camera-to-world with the OpenCV axis layout
//! (+x right, +y down, +z forward). `center` is the camera position in
//! world coordinates. The world up axis defaults to +z.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance for rotation orthonormality / unit-norm checks.
pub const POSE_TOL: f64 = 1e-9;

/// Default world up axis (+z).
pub fn default_up() -> Vector3<f64> {
    Vector3::z()
}

/// Pinhole intrinsics shared by every frame of a clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::domain(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if !(0.0..=width as f64).contains(&cx) || !(0.0..=height as f64).contains(&cy) {
            return Err(Error::domain(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Symmetric-FOV intrinsics with the principal point at the image center.
    pub fn from_fov(width: u32, height: u32, fov_x_deg: f64) -> Result<Self> {
        let fov = fov_x_deg.to_radians();
        if !(fov > 0.0 && fov < std::f64::consts::PI) {
            return Err(Error::domain(format!("fov {fov_x_deg} deg out of (0, 180)")));
        }
        let fx = width as f64 / (2.0 * (fov / 2.0).tan());
        Self::new(fx, fx, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    /// K^-1 [u, v, 1]^T: the camera-frame direction of pixel (u, v) at unit z.
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Intrinsics rescaled to a `w`x`h` pixel grid.
    pub fn rescaled(&self, w: u32, h: u32) -> Result<Self> {
        let sx = w as f64 / self.width as f64;
        let sy = h as f64 / self.height as f64;
        Self::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, w, h)
    }
}

/// Rigid camera-to-world transform: orthonormal rotation plus camera center.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    center: Vector3<f64>,
}

impl CameraPose {
    /// Validates orthonormality and det +1 within [`POSE_TOL`].
    pub fn new(rotation: Matrix3<f64>, center: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > POSE_TOL {
            return Err(Error::domain(format!(
                "rotation not orthonormal (max deviation {ortho_err:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > POSE_TOL {
            return Err(Error::domain(format!("rotation determinant {det} != +1")));
        }
        if !center.iter().all(|x| x.is_finite()) {
            return Err(Error::domain("camera center must be finite".to_string()));
        }
        Ok(Self { rotation, center })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), center: Vector3::zeros() }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    /// Camera forward axis (+z column) in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.column(2).into()
    }

    /// World point -> camera frame.
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.center)
    }

    /// Pose positioned at `center` with +z looking at `target` and the image
    /// x axis horizontal with respect to `up`.
    pub fn look_at(center: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - center;
        if forward.norm() < 1e-12 {
            return Err(Error::domain("look-at target coincides with camera center".to_string()));
        }
        let f = forward.normalize();
        let mut u = up.normalize();
        if f.cross(&u).norm() < 1e-9 {
            // View direction parallel to up: nudge the up reference.
            u = (u + Vector3::new(1e-3, 2e-3, 0.0)).normalize();
            if f.cross(&u).norm() < 1e-9 {
                u = (u + Vector3::new(0.0, 1e-3, 2e-3)).normalize();
            }
        }
        let right = f.cross(&u).normalize();
        let down = f.cross(&right).normalize();
        Self::new(Matrix3::from_columns(&[right, down, f]), center)
    }
}

/// Geodesic angle (radians) between two rotation matrices.
pub fn geodesic_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos()
}

/// Half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > POSE_TOL {
            return Err(Error::domain(format!(
                "ray direction norm {} != 1",
                direction.norm()
            )));
        }
        Ok(Self { origin, direction })
    }

    /// Point at parameter `t` along the ray.
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }
}

/// How the per-pixel ray direction is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayMode {
    /// Normalize the bare world-space direction R K^-1 [u, v, 1]^T.
    Standard,
    /// Normalize the pixel's world point R K^-1 [u, v, 1]^T + center instead
    /// of the direction, producing a position-dependent unit vector.
    PointNormalized,
}

/// Ray of pixel (u, v) for a posed pinhole camera.
pub fn pixel_ray(pose: &CameraPose, intr: &Intrinsics, u: f64, v: f64, mode: RayMode) -> Result<Ray> {
    if !(0.0..=intr.width as f64).contains(&u) || !(0.0..=intr.height as f64).contains(&v) {
        return Err(Error::domain(format!(
            "pixel ({u}, {v}) outside {}x{} image",
            intr.width, intr.height
        )));
    }
    let world_dir = pose.rotation * intr.unproject(u, v);
    let raw = match mode {
        RayMode::Standard => world_dir,
        RayMode::PointNormalized => world_dir + pose.center,
    };
    let n = raw.norm();
    if n < 1e-300 {
        return Err(Error::Numerical("pixel ray has zero length".to_string()));
    }
    Ray::new(pose.center, raw / n)
}

/// Per-pixel Plücker 6-vectors (moment, direction) for a pose sequence.
///
/// Layout: frame-major, then row (v), then column (u).
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerImage {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<[f64; 6]>,
}

impl PluckerImage {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn entry(&self, f: usize, v: usize, u: usize) -> &[f64; 6] {
        &self.data[(f * self.height + v) * self.width + u]
    }

    pub fn moment(&self, f: usize, v: usize, u: usize) -> Vector3<f64> {
        let e = self.entry(f, v, u);
        Vector3::new(e[0], e[1], e[2])
    }

    pub fn direction(&self, f: usize, v: usize, u: usize) -> Vector3<f64> {
        let e = self.entry(f, v, u);
        Vector3::new(e[3], e[4], e[5])
    }

    pub fn as_slice(&self) -> &[[f64; 6]] {
        &self.data
    }
}

/// Plücker embedding of a pose sequence on an `h`x`w` pixel grid.
///
/// Rays are taken at pixel centers with the intrinsics rescaled to the grid,
/// so the grid may be coarser than the native image. Each entry is
/// (center x d, d) for the pixel's ray.
pub fn plucker_embed(
    poses: &[CameraPose],
    intr: &Intrinsics,
    h: u32,
    w: u32,
    mode: RayMode,
) -> Result<PluckerImage> {
    if poses.is_empty() {
        return Err(Error::domain("plucker_embed needs at least one pose".to_string()));
    }
    if h == 0 || w == 0 {
        return Err(Error::domain(format!("plucker grid {w}x{h} must be nonempty")));
    }
    let grid_intr = intr.rescaled(w, h)?;
    let mut data = Vec::with_capacity(poses.len() * h as usize * w as usize);
    for pose in poses {
        for v in 0..h {
            for u in 0..w {
                let ray = pixel_ray(pose, &grid_intr, u as f64 + 0.5, v as f64 + 0.5, mode)?;
                let m = pose.center.cross(&ray.direction);
                let d = ray.direction;
                data.push([m.x, m.y, m.z, d.x, d.y, d.z]);
            }
        }
    }
    Ok(PluckerImage { frames: poses.len(), height: h as usize, width: w as usize, data })
}

/// Shortest-arc pose interpolation: quaternion slerp for rotation, linear
/// interpolation for the camera center. `s = 0` and `s = 1` return the
/// endpoints bitwise.
pub fn slerp_pose(a: &CameraPose, b: &CameraPose, s: f64) -> Result<CameraPose> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("interpolation parameter {s} outside [0, 1]")));
    }
    if s == 0.0 {
        return Ok(a.clone());
    }
    if s == 1.0 {
        return Ok(b.clone());
    }
    let qa = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(a.rotation));
    let qb = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(b.rotation));
    let mut dot = qa.coords.dot(&qb.coords);
    // Double cover: q and -q are the same rotation; flip for the short arc.
    let qb_coords = if dot < 0.0 {
        dot = -dot;
        -qb.coords
    } else {
        qb.coords
    };
    let (wa, wb) = if dot > 1.0 - 1e-12 {
        (1.0 - s, s)
    } else {
        let theta = dot.clamp(-1.0, 1.0).acos();
        let sin_theta = theta.sin();
        (
            ((1.0 - s) * theta).sin() / sin_theta,
            (s * theta).sin() / sin_theta,
        )
    };
    let q = UnitQuaternion::new_normalize(Quaternion::from(qa.coords * wa + qb_coords * wb));
    let rotation = q.to_rotation_matrix().into_inner();
    let center = a.center * (1.0 - s) + b.center * s;
    CameraPose::new(rotation, center)
}

/// `n_frames` poses interpolated at s = i / (n_frames - 1); first is `a`
/// bitwise, last is `b` bitwise.
pub fn interpolate_trajectory(a: &CameraPose, b: &CameraPose, n_frames: usize) -> Result<Trajectory> {
    if n_frames < 2 {
        return Err(Error::domain(format!("trajectory needs >= 2 frames, got {n_frames}")));
    }
    let mut poses = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let s = i as f64 / (n_frames - 1) as f64;
        poses.push(slerp_pose(a, b, s)?);
    }
    Trajectory::new(poses)
}

/// Ordered pose sequence; the unit the planner produces and optimizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<CameraPose>,
}

impl Trajectory {
    pub fn new(poses: Vec<CameraPose>) -> Result<Self> {
        if poses.len() < 2 {
            return Err(Error::domain(format!(
                "trajectory needs >= 2 poses, got {}",
                poses.len()
            )));
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn first(&self) -> &CameraPose {
        &self.poses[0]
    }

    pub fn last(&self) -> &CameraPose {
        &self.poses[self.poses.len() - 1]
    }
}

/// Angular region candidates are drawn from, relative to the current pose.
///
/// `azimuth_span` bounds the absolute azimuth around `azimuth_center` when
/// one is set (the quarter-sphere of the default). `step_*` bound the
/// per-step offsets from the current pose.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    /// Total allowed azimuth span (radians) about `azimuth_center`.
    pub azimuth_span: f64,
    /// Absolute azimuth the span is centered on; `None` disables clamping.
    pub azimuth_center: Option<f64>,
    /// Allowed elevation interval (radians).
    pub elevation_range: (f64, f64),
    /// Per-step azimuth offset limit (radians).
    pub step_azimuth: f64,
    /// Per-step elevation offset limit (radians).
    pub step_elevation: f64,
    /// World up axis.
    pub up: Vector3<f64>,
}

impl Default for SearchSpace {
    /// Quarter-sphere: 90 deg azimuth span, elevation in [0, 60] deg,
    /// per-step offsets of +-30 deg azimuth and +-15 deg elevation.
    fn default() -> Self {
        Self {
            azimuth_span: 90f64.to_radians(),
            azimuth_center: None,
            elevation_range: (0.0, 60f64.to_radians()),
            step_azimuth: 30f64.to_radians(),
            step_elevation: 15f64.to_radians(),
            up: default_up(),
        }
    }
}

impl SearchSpace {
    /// Search space with per-step offset limits doubled (exhaustion fallback).
    pub fn expanded(&self) -> Self {
        Self {
            step_azimuth: self.step_azimuth * 2.0,
            step_elevation: self.step_elevation * 2.0,
            ..self.clone()
        }
    }
}

/// Deterministic orthonormal pair (e1, e2) spanning the plane
/// perpendicular to a unit `axis`.
pub(crate) fn orthonormal_complement(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let candidate = Vector3::x() - axis * axis.x;
    let e1 = if candidate.norm() > 1e-6 {
        candidate.normalize()
    } else {
        let alt = Vector3::y() - axis * axis.y;
        alt.normalize()
    };
    let e2 = axis.cross(&e1);
    (e1, e2)
}

/// Draws `k` look-at poses on the sphere through `curr` about `scene_center`,
/// with azimuth/elevation offsets uniform within the search-space limits.
/// Deterministic for a given seed.
pub fn sample_candidates(
    scene_center: Vector3<f64>,
    curr: &CameraPose,
    k: usize,
    space: &SearchSpace,
    seed: u64,
) -> Result<Vec<CameraPose>> {
    if k == 0 {
        return Err(Error::domain("candidate count must be >= 1".to_string()));
    }
    let offset = curr.center() - scene_center;
    let radius = offset.norm();
    if radius < 1e-12 {
        return Err(Error::domain("current pose sits at the scene center".to_string()));
    }
    let up = space.up.normalize();
    let (e1, e2) = orthonormal_complement(&up);
    let azimuth = offset.dot(&e2).atan2(offset.dot(&e1));
    let elevation = (offset.dot(&up) / radius).clamp(-1.0, 1.0).asin();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let daz = if space.step_azimuth > 0.0 {
            rng.random_range(-space.step_azimuth..=space.step_azimuth)
        } else {
            0.0
        };
        let del = if space.step_elevation > 0.0 {
            rng.random_range(-space.step_elevation..=space.step_elevation)
        } else {
            0.0
        };
        let mut az = azimuth + daz;
        if let Some(c) = space.azimuth_center {
            az = az.clamp(c - space.azimuth_span / 2.0, c + space.azimuth_span / 2.0);
        }
        let el = (elevation + del).clamp(space.elevation_range.0, space.elevation_range.1);
        let dir = (e1 * az.cos() + e2 * az.sin()) * el.cos() + up * el.sin();
        let center = scene_center + dir * radius;
        out.push(CameraPose::look_at(center, scene_center, up)?);
    }
    Ok(out)
}
