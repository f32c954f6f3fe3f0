//! Forward alpha-compositing renderer over 3D Gaussians, stochastic
//! Gaussian dropping with opacity compensation, and the L1 photometric and
//! depth losses.
//!
//! Per ray, each Gaussian's opacity is evaluated at the ray's closest
//! approach to its center and composited front to back in closest-approach
//! order. Gaussians whose closest approach lies behind the origin or beyond
//! the 3-sigma Mahalanobis shell (squared distance > 9) are skipped.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{pixel_ray, CameraPose, Intrinsics, Ray, RayMode, POSE_TOL};
use crate::cloud::DepthMap;
use crate::color::ColorImage;
use crate::error::{Error, Result};

/// Mahalanobis-squared culling radius (3 sigma).
const CULL_M2: f64 = 9.0;
/// Upper clamp on per-Gaussian alpha before compositing.
const ALPHA_CLAMP: f64 = 0.999;
/// Covariance condition-number limit for opacity evaluation.
const MAX_CONDITION: f64 = 1e12;

/// Anisotropic 3D Gaussian: center, color, opacity, per-axis scale, and
/// orientation. Covariance is R diag(scale^2) R^T.
///
/// `opacity` is in [0, 1] at construction; [`drop_gaussians`] stores the
/// compensated opacity unclamped and evaluation clamps it back to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    pub mu: Vector3<f64>,
    pub color: Vector3<f64>,
    pub opacity: f64,
    pub scale: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Gaussian3D {
    pub fn new(
        mu: Vector3<f64>,
        color: Vector3<f64>,
        opacity: f64,
        scale: Vector3<f64>,
        rotation: Matrix3<f64>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&opacity) {
            return Err(Error::domain(format!("opacity {opacity} outside [0, 1]")));
        }
        if !color.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::domain(format!("color {color:?} outside [0, 1]")));
        }
        if !scale.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!("scale {scale:?} must be positive")));
        }
        let gram = rotation.transpose() * rotation;
        if (gram - Matrix3::identity()).abs().max() > POSE_TOL
            || (rotation.determinant() - 1.0).abs() > POSE_TOL
        {
            return Err(Error::domain("gaussian rotation must be orthonormal det +1".to_string()));
        }
        Ok(Self { mu, color, opacity, scale, rotation })
    }

    /// Isotropic Gaussian with identity orientation.
    pub fn isotropic(mu: Vector3<f64>, color: Vector3<f64>, opacity: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, color, opacity, Vector3::new(sigma, sigma, sigma), Matrix3::identity())
    }

    fn condition(&self) -> f64 {
        let smax = self.scale.max();
        let smin = self.scale.min();
        (smax / smin).powi(2)
    }

    /// Squared Mahalanobis distance of `p` under this Gaussian's covariance.
    fn mahalanobis2(&self, p: &Vector3<f64>) -> f64 {
        let local = self.rotation.transpose() * (p - self.mu);
        let scaled = Vector3::new(
            local.x / self.scale.x,
            local.y / self.scale.y,
            local.z / self.scale.z,
        );
        scaled.norm_squared()
    }
}

/// Opacity of the Gaussian at point `p`: eta * exp(-1/2 (p-mu)^T Sigma^-1 (p-mu)).
pub fn eval_alpha(g: &Gaussian3D, p: &Vector3<f64>) -> Result<f64> {
    if g.condition() > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "covariance condition {:.3e} exceeds {MAX_CONDITION:.0e}",
            g.condition()
        )));
    }
    let eta = g.opacity.clamp(0.0, 1.0);
    Ok(eta * (-0.5 * g.mahalanobis2(p)).exp())
}

/// A set of Gaussians composited over a constant background.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    pub gaussians: Vec<Gaussian3D>,
    pub background: Vector3<f64>,
}

impl GaussianScene {
    pub fn new(gaussians: Vec<Gaussian3D>, background: Vector3<f64>) -> Result<Self> {
        if !background.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::domain(format!("background {background:?} outside [0, 1]")));
        }
        Ok(Self { gaussians, background })
    }

    /// Serializes the Gaussian list as a JSON array of
    /// `{mu, color, opacity, scale, rotation}` entries (rotation row-major).
    pub fn to_json(&self) -> String {
        let entries: Vec<GaussianFile> = self.gaussians.iter().map(GaussianFile::from).collect();
        serde_json::to_string_pretty(&entries).expect("gaussians serialize")
    }

    /// Parses a JSON Gaussian array; the background is supplied by the caller.
    pub fn from_json(text: &str, background: Vector3<f64>) -> Result<Self> {
        let entries: Vec<GaussianFile> = serde_json::from_str(text)?;
        let gaussians = entries.into_iter().map(|e| e.build()).collect::<Result<Vec<_>>>()?;
        Self::new(gaussians, background)
    }
}

#[derive(Serialize, Deserialize)]
struct GaussianFile {
    mu: [f64; 3],
    color: [f64; 3],
    opacity: f64,
    scale: [f64; 3],
    rotation: [f64; 9],
}

impl From<&Gaussian3D> for GaussianFile {
    fn from(g: &Gaussian3D) -> Self {
        let r = &g.rotation;
        GaussianFile {
            mu: g.mu.into(),
            color: g.color.into(),
            opacity: g.opacity,
            scale: g.scale.into(),
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
        }
    }
}

impl GaussianFile {
    fn build(self) -> Result<Gaussian3D> {
        let r = self.rotation;
        let rotation = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
        Gaussian3D::new(
            self.mu.into(),
            self.color.into(),
            self.opacity,
            self.scale.into(),
            rotation,
        )
    }
}

/// Radiance gathered along one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayRadiance {
    pub color: Vector3<f64>,
    /// Sum of compositing weights.
    pub alpha: f64,
    /// Light remaining after all Gaussians; the background's share.
    pub transmittance: f64,
    /// Weight-averaged closest-approach depth; `None` when nothing was hit.
    pub depth: Option<f64>,
}

/// Front-to-back volume compositing of the scene along `ray`.
pub fn render_ray(scene: &GaussianScene, ray: &Ray) -> RayRadiance {
    // (closest-approach t, alpha, color) per contributing Gaussian.
    let mut hits: Vec<(f64, f64, Vector3<f64>)> = Vec::new();
    for g in &scene.gaussians {
        let t = (g.mu - ray.origin).dot(&ray.direction);
        if t < 0.0 || g.condition() > MAX_CONDITION {
            continue;
        }
        let m2 = g.mahalanobis2(&ray.at(t));
        if m2 > CULL_M2 {
            continue;
        }
        let alpha = (g.opacity.clamp(0.0, 1.0) * (-0.5 * m2).exp()).clamp(0.0, ALPHA_CLAMP);
        hits.push((t, alpha, g.color));
    }
    // Sort on the full contribution (t, alpha, color) so storage order can
    // never leak into the output, even with coincident Gaussians.
    hits.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.x.partial_cmp(&b.2.x).unwrap())
            .then(a.2.y.partial_cmp(&b.2.y).unwrap())
            .then(a.2.z.partial_cmp(&b.2.z).unwrap())
    });

    let mut transmittance = 1.0;
    let mut color = Vector3::zeros();
    let mut weight_sum = 0.0;
    let mut depth_sum = 0.0;
    for (t, alpha, c) in hits {
        let w = alpha * transmittance;
        color += c * w;
        depth_sum += t * w;
        weight_sum += w;
        transmittance *= 1.0 - alpha;
    }
    color += scene.background * transmittance;
    let depth = (weight_sum > 0.0).then(|| depth_sum / weight_sum);
    RayRadiance { color, alpha: weight_sum, transmittance, depth }
}

/// Full per-pixel rendering: color, accumulated alpha, and expected depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub image: ColorImage,
    pub alpha: Vec<f64>,
    pub depth: DepthMap,
}

/// Renders the scene through a pinhole camera using standard pixel rays at
/// integer coordinates. Deterministic and seed-free.
pub fn render_image(scene: &GaussianScene, pose: &CameraPose, intr: &Intrinsics) -> Result<RenderedImage> {
    let w = intr.width;
    let h = intr.height;
    let n = (w as usize) * (h as usize);
    let mut pixels = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut depth_values = vec![0.0; n];
    let mut depth_valid = vec![false; n];
    for v in 0..h {
        for u in 0..w {
            let ray = pixel_ray(pose, intr, u as f64, v as f64, RayMode::Standard)?;
            let out = render_ray(scene, &ray);
            // Compositing is convex so values only leave [0, 1] by rounding.
            pixels.push(Vector3::new(
                out.color.x.clamp(0.0, 1.0),
                out.color.y.clamp(0.0, 1.0),
                out.color.z.clamp(0.0, 1.0),
            ));
            alpha.push(out.alpha);
            if let Some(d) = out.depth {
                if d > 0.0 {
                    let i = (v * w + u) as usize;
                    depth_values[i] = d;
                    depth_valid[i] = true;
                }
            }
        }
    }
    Ok(RenderedImage {
        image: ColorImage::new(w, h, pixels)?,
        alpha,
        depth: DepthMap::new(w, h, depth_values, depth_valid)?,
    })
}

/// Linear dropping-rate schedule: r_t = gamma * t / t_total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropSchedule {
    /// Maximum dropping rate, in [0, 1).
    pub gamma: f64,
    pub t_total: u32,
}

impl DropSchedule {
    pub fn new(gamma: f64, t_total: u32) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::domain(format!("gamma {gamma} outside [0, 1)")));
        }
        if t_total == 0 {
            return Err(Error::domain("schedule needs t_total >= 1".to_string()));
        }
        Ok(Self { gamma, t_total })
    }
}

/// Dropping rate at iteration `t`.
pub fn drop_rate(t: u32, sched: &DropSchedule) -> Result<f64> {
    if t > sched.t_total {
        return Err(Error::domain(format!("iteration {t} beyond t_total {}", sched.t_total)));
    }
    Ok(sched.gamma * t as f64 / sched.t_total as f64)
}

/// Independently keeps each Gaussian with probability 1 - r and multiplies
/// surviving opacities by 1 / (1 - r). The compensated opacity is stored
/// unclamped; evaluation clamps it.
pub fn drop_gaussians(scene: &GaussianScene, r: f64, seed: u64) -> Result<GaussianScene> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::domain(format!("dropping rate {r} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    for g in &scene.gaussians {
        let u: f64 = rng.random_range(0.0..1.0);
        if u >= r {
            let mut g = g.clone();
            g.opacity /= 1.0 - r;
            kept.push(g);
        }
    }
    Ok(GaussianScene { gaussians: kept, background: scene.background })
}

/// Mean absolute difference over all pixel channels.
pub fn l1_rgb(rendered: &ColorImage, reference: &ColorImage) -> Result<f64> {
    if rendered.width() != reference.width() || rendered.height() != reference.height() {
        return Err(Error::domain("image shapes differ".to_string()));
    }
    let n = rendered.pixels().len() as f64 * 3.0;
    // One accumulation per channel in row-major order.
    let mut sum = 0.0;
    for (a, b) in rendered.pixels().iter().zip(reference.pixels()) {
        for k in 0..3 {
            sum += (a[k] - b[k]).abs();
        }
    }
    Ok(sum / n)
}

/// Mean absolute depth difference over pixels that are masked and valid in
/// both maps.
pub fn l1_depth(rendered: &DepthMap, reference: &DepthMap, mask: &[bool]) -> Result<f64> {
    let n = rendered.values().len();
    if reference.values().len() != n || mask.len() != n || rendered.width() != reference.width() {
        return Err(Error::domain("depth shapes differ".to_string()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        if mask[i] && rendered.valid_flags()[i] && reference.valid_flags()[i] {
            sum += (rendered.values()[i] - reference.values()[i]).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::domain("no masked valid pixels for depth loss".to_string()));
    }
    Ok(sum / count as f64)
}
