//! Analytic ray-cast oracle over primitive scenes.
//!
//! Stands in for the learned view synthesizer and geometry annotator at desk
//! scale: every view comes with exact depth and pose, optionally degraded by
//! a seeded noise model to emulate model error.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::camera::{orthonormal_complement, pixel_ray, CameraPose, Intrinsics, Ray, RayMode, Trajectory};
use crate::cloud::{DepthMap, PointCloud};
use crate::color::ColorImage;
use crate::error::{Error, Result};

/// Analytic scene primitive.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Sphere { center: Vector3<f64>, radius: f64, color: Vector3<f64> },
    Cuboid { min: Vector3<f64>, max: Vector3<f64>, color: Vector3<f64> },
    /// Square patch of the plane through `point` with unit `normal`; the
    /// half extent comes from the owning scene.
    Plane { point: Vector3<f64>, normal: Vector3<f64>, color: Vector3<f64> },
}

impl Primitive {
    fn validate(&self) -> Result<()> {
        match self {
            Primitive::Sphere { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::domain(format!("sphere radius {radius} must be > 0")));
                }
            }
            Primitive::Cuboid { min, max, .. } => {
                if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                    return Err(Error::domain(format!("box min {min:?} not below max {max:?}")));
                }
            }
            Primitive::Plane { normal, .. } => {
                if (normal.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::domain(format!(
                        "plane normal {normal:?} must be unit length"
                    )));
                }
            }
        }
        Ok(())
    }

    fn color(&self) -> Vector3<f64> {
        match self {
            Primitive::Sphere { color, .. }
            | Primitive::Cuboid { color, .. }
            | Primitive::Plane { color, .. } => *color,
        }
    }

    /// Euclidean distance from `p` to this primitive's surface
    /// (patch-bounded for planes).
    pub fn surface_distance(&self, p: &Vector3<f64>, plane_half_extent: f64) -> f64 {
        match self {
            Primitive::Sphere { center, radius, .. } => ((p - center).norm() - radius).abs(),
            Primitive::Cuboid { min, max, .. } => {
                let mut outside = 0.0f64;
                let mut inside = f64::INFINITY;
                for a in 0..3 {
                    let lo = min[a] - p[a];
                    let hi = p[a] - max[a];
                    let excess = lo.max(hi);
                    if excess > 0.0 {
                        outside += excess * excess;
                    } else {
                        inside = inside.min(-excess);
                    }
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            Primitive::Plane { point, normal, .. } => {
                let (e1, e2) = orthonormal_complement(normal);
                let q = p - point;
                let s = q.dot(&e1).clamp(-plane_half_extent, plane_half_extent);
                let t = q.dot(&e2).clamp(-plane_half_extent, plane_half_extent);
                let closest = point + e1 * s + e2 * t;
                (p - closest).norm()
            }
        }
    }
}

/// Per-pose start of the shipped scenes: an orbit position around `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraStart {
    pub target: [f64; 3],
    pub radius: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl CameraStart {
    /// Look-at pose at the configured orbit position (world up +z).
    pub fn pose(&self) -> Result<CameraPose> {
        let target = Vector3::from(self.target);
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        CameraPose::look_at(target + dir * self.radius, target, Vector3::z())
    }
}

/// Ground-truth primitive scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub primitives: Vec<Primitive>,
    pub background: Vector3<f64>,
    /// Half side length of every plane patch.
    pub plane_half_extent: f64,
    /// Suggested initial camera for planning runs.
    pub camera_start: Option<CameraStart>,
}

impl SyntheticScene {
    pub fn new(
        primitives: Vec<Primitive>,
        background: Vector3<f64>,
        plane_half_extent: f64,
        camera_start: Option<CameraStart>,
    ) -> Result<Self> {
        for p in &primitives {
            p.validate()?;
        }
        if !(plane_half_extent > 0.0) {
            return Err(Error::domain(format!(
                "plane half extent {plane_half_extent} must be > 0"
            )));
        }
        Ok(Self { primitives, background, plane_half_extent, camera_start })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SceneFile::from(self)).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        file.try_into()
    }

    /// Names of the shipped benchmark scenes.
    pub fn builtin_names() -> [&'static str; 3] {
        ["room", "pillars", "corridor"]
    }

    /// One of the shipped benchmark scenes by name.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "room" => include_str!("../scenes/room.json"),
            "pillars" => include_str!("../scenes/pillars.json"),
            "corridor" => include_str!("../scenes/corridor.json"),
            _ => {
                return Err(Error::domain(format!(
                    "unknown scene '{name}' (expected one of room, pillars, corridor)"
                )))
            }
        };
        Self::from_json(text)
    }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// Scene file schema: `{"background": [r,g,b], "plane_half_extent": f,
/// "camera_start": {...}?, "primitives": [{"type": ...}]}`.
#[derive(Serialize, Deserialize)]
struct SceneFile {
    background: [f64; 3],
    plane_half_extent: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    camera_start: Option<CameraStart>,
    primitives: Vec<PrimitiveFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum PrimitiveFile {
    Sphere { center: [f64; 3], radius: f64, color: [f64; 3] },
    Box { min: [f64; 3], max: [f64; 3], color: [f64; 3] },
    Plane { point: [f64; 3], normal: [f64; 3], color: [f64; 3] },
}

impl From<&SyntheticScene> for SceneFile {
    fn from(s: &SyntheticScene) -> Self {
        let primitives = s
            .primitives
            .iter()
            .map(|p| match p {
                Primitive::Sphere { center, radius, color } => PrimitiveFile::Sphere {
                    center: (*center).into(),
                    radius: *radius,
                    color: (*color).into(),
                },
                Primitive::Cuboid { min, max, color } => PrimitiveFile::Box {
                    min: (*min).into(),
                    max: (*max).into(),
                    color: (*color).into(),
                },
                Primitive::Plane { point, normal, color } => PrimitiveFile::Plane {
                    point: (*point).into(),
                    normal: (*normal).into(),
                    color: (*color).into(),
                },
            })
            .collect();
        SceneFile {
            background: s.background.into(),
            plane_half_extent: s.plane_half_extent,
            camera_start: s.camera_start.clone(),
            primitives,
        }
    }
}

impl TryFrom<SceneFile> for SyntheticScene {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Self> {
        let primitives = f
            .primitives
            .into_iter()
            .map(|p| match p {
                PrimitiveFile::Sphere { center, radius, color } => Primitive::Sphere {
                    center: center.into(),
                    radius,
                    color: color.into(),
                },
                PrimitiveFile::Box { min, max, color } => Primitive::Cuboid {
                    min: min.into(),
                    max: max.into(),
                    color: color.into(),
                },
                PrimitiveFile::Plane { point, normal, color } => Primitive::Plane {
                    point: point.into(),
                    normal: normal.into(),
                    color: color.into(),
                },
            })
            .collect();
        SyntheticScene::new(primitives, f.background.into(), f.plane_half_extent, f.camera_start)
    }
}

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

/// Nearest hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Distance along the (unit-direction) ray.
    pub depth: f64,
    pub color: Vector3<f64>,
}

fn intersect_sphere(ray: &Ray, center: &Vector3<f64>, radius: f64) -> Option<f64> {
    let oc = ray.origin - center;
    let b = oc.dot(&ray.direction);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t1 = -b - sq;
    if t1 > 0.0 {
        return Some(t1);
    }
    let t2 = -b + sq;
    (t2 > 0.0).then_some(t2)
}

fn intersect_cuboid(ray: &Ray, min: &Vector3<f64>, max: &Vector3<f64>) -> Option<f64> {
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for a in 0..3 {
        let d = ray.direction[a];
        let o = ray.origin[a];
        if d == 0.0 {
            if o < min[a] || o > max[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let mut t0 = (min[a] - o) * inv;
        let mut t1 = (max[a] - o) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        tmin = tmin.max(t0);
        tmax = tmax.min(t1);
        if tmin > tmax {
            return None;
        }
    }
    if tmin > 0.0 {
        Some(tmin)
    } else if tmax > 0.0 {
        Some(tmax)
    } else {
        None
    }
}

fn intersect_plane_patch(
    ray: &Ray,
    point: &Vector3<f64>,
    normal: &Vector3<f64>,
    half_extent: f64,
) -> Option<f64> {
    let denom = ray.direction.dot(normal);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (point - ray.origin).dot(normal) / denom;
    if t <= 0.0 {
        return None;
    }
    let hit = ray.at(t);
    let (e1, e2) = orthonormal_complement(normal);
    let q = hit - point;
    (q.dot(&e1).abs() <= half_extent && q.dot(&e2).abs() <= half_extent).then_some(t)
}

/// Nearest positive-depth intersection across all primitives.
pub fn raycast(scene: &SyntheticScene, ray: &Ray) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;
    for prim in &scene.primitives {
        let t = match prim {
            Primitive::Sphere { center, radius, .. } => intersect_sphere(ray, center, *radius),
            Primitive::Cuboid { min, max, .. } => intersect_cuboid(ray, min, max),
            Primitive::Plane { point, normal, .. } => {
                intersect_plane_patch(ray, point, normal, scene.plane_half_extent)
            }
        };
        if let Some(t) = t {
            if best.is_none_or(|b| t < b.depth) {
                best = Some(RayHit { depth: t, color: prim.color() });
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// View synthesis
// ---------------------------------------------------------------------------

/// Seeded degradation of oracle depth: multiplicative Gaussian error plus
/// random pixel invalidation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Relative standard deviation of depth error.
    pub depth_sigma: f64,
    /// Probability that a valid pixel is dropped.
    pub dropout_ratio: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(depth_sigma: f64, dropout_ratio: f64, seed: u64) -> Result<Self> {
        if !(depth_sigma >= 0.0) {
            return Err(Error::domain(format!("depth sigma {depth_sigma} must be >= 0")));
        }
        if !(0.0..=1.0).contains(&dropout_ratio) {
            return Err(Error::domain(format!("dropout ratio {dropout_ratio} outside [0, 1]")));
        }
        Ok(Self { depth_sigma, dropout_ratio, seed })
    }
}

/// RGB view with exact (or noise-degraded) depth and its pose.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedView {
    pub image: ColorImage,
    pub depth: DepthMap,
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
}

/// Ray-cast view of the scene from one pose. `noise_stream` decorrelates the
/// noise of different frames sharing one seed.
pub fn synthesize_view(
    scene: &SyntheticScene,
    pose: &CameraPose,
    intr: &Intrinsics,
    noise: Option<&NoiseModel>,
    noise_stream: u64,
) -> Result<AnnotatedView> {
    let w = intr.width;
    let h = intr.height;
    let n = (w as usize) * (h as usize);
    let mut pixels = vec![scene.background; n];
    let mut values = vec![0.0f64; n];
    let mut valid = vec![false; n];
    for v in 0..h {
        for u in 0..w {
            let ray = pixel_ray(pose, intr, u as f64, v as f64, RayMode::Standard)?;
            if let Some(hit) = raycast(scene, &ray) {
                let i = (v * w + u) as usize;
                pixels[i] = hit.color;
                values[i] = hit.depth;
                valid[i] = true;
            }
        }
    }

    if let Some(noise) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(
            noise.seed ^ (noise_stream.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        for i in 0..n {
            if !valid[i] {
                continue;
            }
            if noise.depth_sigma > 0.0 {
                let eps: f64 = rng.sample(StandardNormal);
                values[i] *= 1.0 + noise.depth_sigma * eps;
            }
            let dropped = noise.dropout_ratio > 0.0
                && rng.random_range(0.0..1.0) < noise.dropout_ratio;
            if dropped || values[i] <= 0.0 || !values[i].is_finite() {
                valid[i] = false;
                values[i] = 0.0;
            }
        }
    }

    Ok(AnnotatedView {
        image: ColorImage::new(w, h, pixels)?,
        depth: DepthMap::new(w, h, values, valid)?,
        pose: pose.clone(),
        intrinsics: *intr,
    })
}

/// One annotated view per trajectory pose (noise streams 0, 1, 2, ...).
pub fn synthesize_views(
    scene: &SyntheticScene,
    traj: &Trajectory,
    intr: &Intrinsics,
    noise: Option<&NoiseModel>,
) -> Result<Vec<AnnotatedView>> {
    traj.poses()
        .iter()
        .enumerate()
        .map(|(i, pose)| synthesize_view(scene, pose, intr, noise, i as u64))
        .collect()
}

/// Planner-facing bundle of a scene and a noise model.
///
/// Segment and frame indices are folded into the noise stream, so a full
/// planning run is reproducible while every frame sees fresh noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOracle {
    pub scene: SyntheticScene,
    pub noise: Option<NoiseModel>,
}

impl SyntheticOracle {
    pub fn new(scene: SyntheticScene, noise: Option<NoiseModel>) -> Self {
        Self { scene, noise }
    }

    /// The reference view a planning run starts from (its own noise stream).
    pub fn initial_view(&self, pose: &CameraPose, intr: &Intrinsics) -> Result<AnnotatedView> {
        synthesize_view(&self.scene, pose, intr, self.noise.as_ref(), u64::MAX)
    }
}

impl crate::planner::SceneOracle for SyntheticOracle {
    fn synthesize_segment(
        &self,
        segment: usize,
        traj: &Trajectory,
        intr: &Intrinsics,
    ) -> Result<Vec<AnnotatedView>> {
        traj.poses()
            .iter()
            .enumerate()
            .map(|(i, pose)| {
                let stream = (segment as u64).wrapping_mul(1_000_003).wrapping_add(i as u64);
                synthesize_view(&self.scene, pose, intr, self.noise.as_ref(), stream)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Ground-truth sampling
// ---------------------------------------------------------------------------

/// Jittered-grid samples of an (a, b) parameter rectangle, mapped through
/// `emit`. Every grid cell emits one sample, so the surface has no
/// unsampled cells; the count is cols * rows where cols * rows >= n.
fn stratified_rect(
    n: usize,
    a_range: (f64, f64),
    b_range: (f64, f64),
    aspect: f64,
    rng: &mut ChaCha8Rng,
    mut emit: impl FnMut(f64, f64),
) {
    if n == 0 {
        return;
    }
    let cols = ((n as f64 * aspect).sqrt().ceil() as usize).max(1);
    let rows = n.div_ceil(cols);
    for r in 0..rows {
        for c in 0..cols {
            let ja: f64 = rng.random_range(0.0..1.0);
            let jb: f64 = rng.random_range(0.0..1.0);
            let fa = (c as f64 + ja) / cols as f64;
            let fb = (r as f64 + jb) / rows as f64;
            emit(
                a_range.0 + fa * (a_range.1 - a_range.0),
                b_range.0 + fb * (b_range.1 - b_range.0),
            );
        }
    }
}

fn sample_count(area: f64, density: f64) -> usize {
    (area * density).round().max(1.0) as usize
}

/// Stratified surface samples of every primitive, with primitive colors.
///
/// Sample counts follow surface area times `density` (rounded up to fill
/// each sampling grid). Planes and box faces use jittered grids; spheres
/// use a Fibonacci lattice with a seeded azimuth offset, keeping
/// nearest-sample gaps uniformly near sqrt(1 / density) everywhere.
pub fn gt_cloud(scene: &SyntheticScene, density: f64, seed: u64) -> Result<PointCloud> {
    if !(density > 0.0) {
        return Err(Error::domain(format!("sample density {density} must be > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for prim in &scene.primitives {
        let color = prim.color();
        let before = positions.len();
        match prim {
            Primitive::Sphere { center, radius, .. } => {
                let area = 4.0 * std::f64::consts::PI * radius * radius;
                let n = sample_count(area, density);
                let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
                let offset: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                for i in 0..n {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64 + offset;
                    positions.push(
                        center + Vector3::new(s * phi.cos(), s * phi.sin(), z) * *radius,
                    );
                }
            }
            Primitive::Cuboid { min, max, .. } => {
                let ext = max - min;
                // (fixed axis, value, axis a, axis b) for the six faces.
                let faces = [
                    (0usize, min.x, 1usize, 2usize),
                    (0, max.x, 1, 2),
                    (1, min.y, 0, 2),
                    (1, max.y, 0, 2),
                    (2, min.z, 0, 1),
                    (2, max.z, 0, 1),
                ];
                for (fixed, value, a, b) in faces {
                    let area = ext[a] * ext[b];
                    let n = sample_count(area, density);
                    stratified_rect(
                        n,
                        (min[a], max[a]),
                        (min[b], max[b]),
                        ext[a] / ext[b],
                        &mut rng,
                        |pa, pb| {
                            let mut p = Vector3::zeros();
                            p[fixed] = value;
                            p[a] = pa;
                            p[b] = pb;
                            positions.push(p);
                        },
                    );
                }
            }
            Primitive::Plane { point, normal, .. } => {
                let he = scene.plane_half_extent;
                let (e1, e2) = orthonormal_complement(normal);
                let area = 4.0 * he * he;
                let n = sample_count(area, density);
                stratified_rect(n, (-he, he), (-he, he), 1.0, &mut rng, |s, t| {
                    positions.push(point + e1 * s + e2 * t);
                });
            }
        }
        colors.extend(std::iter::repeat_n(color, positions.len() - before));
    }
    PointCloud::new(positions, Some(colors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere_scene() -> SyntheticScene {
        SyntheticScene::new(
            vec![Primitive::Sphere {
                center: Vector3::new(0.0, 0.0, 5.0),
                radius: 1.0,
                color: Vector3::new(0.8, 0.2, 0.2),
            }],
            Vector3::new(0.0, 0.0, 0.0),
            5.0,
            None,
        )
        .unwrap()
    }

    fn axis_ray() -> Ray {
        Ray::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn raycast_sphere_front() {
        let hit = raycast(&sphere_scene(), &axis_ray()).unwrap();
        assert_relative_eq!(hit.depth, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn raycast_miss() {
        let ray = Ray::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert!(raycast(&sphere_scene(), &ray).is_none());
    }

    #[test]
    fn raycast_from_inside_sphere() {
        let scene = SyntheticScene::new(
            vec![Primitive::Sphere {
                center: Vector3::zeros(),
                radius: 2.0,
                color: Vector3::new(0.5, 0.5, 0.5),
            }],
            Vector3::zeros(),
            5.0,
            None,
        )
        .unwrap();
        // Origin is inside: the only positive root is the exit at t = 2.
        let hit = raycast(&scene, &axis_ray()).unwrap();
        assert_relative_eq!(hit.depth, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn raycast_cuboid_and_occlusion() {
        let scene = SyntheticScene::new(
            vec![
                Primitive::Sphere {
                    center: Vector3::new(0.0, 0.0, 6.0),
                    radius: 1.0,
                    color: Vector3::new(1.0, 0.0, 0.0),
                },
                Primitive::Cuboid {
                    min: Vector3::new(-1.0, -1.0, 2.0),
                    max: Vector3::new(1.0, 1.0, 3.0),
                    color: Vector3::new(0.0, 1.0, 0.0),
                },
            ],
            Vector3::zeros(),
            5.0,
            None,
        )
        .unwrap();
        let hit = raycast(&scene, &axis_ray()).unwrap();
        assert_relative_eq!(hit.depth, 2.0, epsilon = 1e-12);
        assert_eq!(hit.color, Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn raycast_plane_patch_bounds() {
        let scene = SyntheticScene::new(
            vec![Primitive::Plane {
                point: Vector3::new(0.0, 0.0, 1.0),
                normal: Vector3::new(0.0, 0.0, 1.0),
                color: Vector3::new(0.2, 0.2, 0.8),
            }],
            Vector3::zeros(),
            2.0,
            None,
        )
        .unwrap();
        let inside = Ray::new(
            Vector3::new(1.5, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        let outside = Ray::new(
            Vector3::new(2.5, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        assert!(raycast(&scene, &inside).is_some());
        assert!(raycast(&scene, &outside).is_none());
    }

    #[test]
    fn view_depth_matches_raycast() {
        let scene = sphere_scene();
        let intr = Intrinsics::new(20.0, 20.0, 8.0, 8.0, 16, 16).unwrap();
        let view =
            synthesize_view(&scene, &CameraPose::identity(), &intr, None, 0).unwrap();
        for v in 0..16u32 {
            for u in 0..16u32 {
                let ray =
                    pixel_ray(&CameraPose::identity(), &intr, u as f64, v as f64, RayMode::Standard)
                        .unwrap();
                match raycast(&scene, &ray) {
                    Some(hit) => assert_eq!(view.depth.get(v, u), Some(hit.depth)),
                    None => assert!(!view.depth.is_valid(v, u)),
                }
            }
        }
        // Principal pixel looks straight down the axis.
        assert_relative_eq!(view.depth.get(8, 8).unwrap(), 4.0, epsilon = 1e-9);
    }

    #[test]
    fn full_dropout_invalidates_everything() {
        let noise = NoiseModel::new(0.0, 1.0, 3).unwrap();
        let intr = Intrinsics::new(20.0, 20.0, 8.0, 8.0, 16, 16).unwrap();
        let view =
            synthesize_view(&sphere_scene(), &CameraPose::identity(), &intr, Some(&noise), 0)
                .unwrap();
        assert_eq!(view.depth.valid_count(), 0);
    }

    #[test]
    fn noise_reproducible() {
        let noise = NoiseModel::new(0.02, 0.1, 11).unwrap();
        let intr = Intrinsics::new(20.0, 20.0, 8.0, 8.0, 16, 16).unwrap();
        let a = synthesize_view(&sphere_scene(), &CameraPose::identity(), &intr, Some(&noise), 4)
            .unwrap();
        let b = synthesize_view(&sphere_scene(), &CameraPose::identity(), &intr, Some(&noise), 4)
            .unwrap();
        assert_eq!(a, b);
        let c = synthesize_view(&sphere_scene(), &CameraPose::identity(), &intr, Some(&noise), 5)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gt_cloud_sphere_count_and_surface() {
        let scene = sphere_scene();
        let density = 200.0;
        let cloud = gt_cloud(&scene, density, 5).unwrap();
        let expected = 4.0 * std::f64::consts::PI * density;
        let n = cloud.len() as f64;
        assert!(
            (n - expected).abs() / expected < 0.1,
            "count {n} vs expected {expected}"
        );
        for p in cloud.positions() {
            let d = scene.primitives[0].surface_distance(p, scene.plane_half_extent);
            assert!(d <= 1e-9, "sample {d} off surface");
        }
    }

    #[test]
    fn back_projected_views_lie_on_surfaces() {
        let scene = SyntheticScene::builtin("pillars").unwrap();
        let pose = scene.camera_start.clone().unwrap().pose().unwrap();
        let intr = Intrinsics::new(30.0, 30.0, 16.0, 16.0, 32, 32).unwrap();
        let view = synthesize_view(&scene, &pose, &intr, None, 0).unwrap();
        let cloud = crate::cloud::back_project(&view.depth, &view.pose, &intr, None).unwrap();
        assert!(!cloud.is_empty());
        for p in cloud.positions() {
            let d = scene
                .primitives
                .iter()
                .map(|prim| prim.surface_distance(p, scene.plane_half_extent))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= 1e-6, "back-projected point {d} off every surface");
        }
    }

    #[test]
    fn plucker_embed_rejects_empty_poses() {
        let intr = Intrinsics::new(10.0, 10.0, 4.0, 4.0, 8, 8).unwrap();
        assert!(crate::camera::plucker_embed(&[], &intr, 4, 4, RayMode::Standard).is_err());
    }

    #[test]
    fn gt_cloud_deterministic() {
        let scene = sphere_scene();
        assert_eq!(gt_cloud(&scene, 50.0, 9).unwrap(), gt_cloud(&scene, 50.0, 9).unwrap());
        assert_ne!(gt_cloud(&scene, 50.0, 9).unwrap(), gt_cloud(&scene, 50.0, 10).unwrap());
    }

    #[test]
    fn scene_json_roundtrip() {
        let scene = SyntheticScene::new(
            vec![
                Primitive::Sphere {
                    center: Vector3::new(0.1, -0.2, 0.3),
                    radius: 0.7,
                    color: Vector3::new(0.9, 0.1, 0.4),
                },
                Primitive::Plane {
                    point: Vector3::zeros(),
                    normal: Vector3::z(),
                    color: Vector3::new(0.5, 0.5, 0.5),
                },
                Primitive::Cuboid {
                    min: Vector3::new(-1.0, -1.0, 0.0),
                    max: Vector3::new(1.0, 1.0, 0.5),
                    color: Vector3::new(0.3, 0.6, 0.2),
                },
            ],
            Vector3::new(0.02, 0.03, 0.04),
            3.5,
            Some(CameraStart {
                target: [0.0, 0.0, 0.4],
                radius: 2.5,
                azimuth_deg: 10.0,
                elevation_deg: 20.0,
            }),
        )
        .unwrap();
        let parsed = SyntheticScene::from_json(&scene.to_json()).unwrap();
        assert_eq!(scene, parsed);
    }

    #[test]
    fn builtin_scenes_parse() {
        for name in SyntheticScene::builtin_names() {
            let scene = SyntheticScene::builtin(name).unwrap();
            assert!(!scene.primitives.is_empty(), "{name} is empty");
            assert!(scene.camera_start.is_some(), "{name} lacks a start pose");
        }
    }
}
