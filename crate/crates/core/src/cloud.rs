//! Point-cloud storage, depth-map back-projection, z-buffered visibility
//! rendering, and voxel-deduplicated merging.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::camera::{pixel_ray, CameraPose, Intrinsics, RayMode};
use crate::color::ColorImage;
use crate::error::{Error, Result};
use crate::spatial::SpatialIndex;

/// World-space points with optional per-point colors in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vector3<f64>>,
    colors: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vector3<f64>>, colors: Option<Vec<Vector3<f64>>>) -> Result<Self> {
        for p in &positions {
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::domain(format!("non-finite point {p:?}")));
            }
        }
        if let Some(cols) = &colors {
            if cols.len() != positions.len() {
                return Err(Error::domain(format!(
                    "{} colors for {} points",
                    cols.len(),
                    positions.len()
                )));
            }
            for c in cols {
                if !c.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)) {
                    return Err(Error::domain(format!("color {c:?} outside [0, 1]")));
                }
            }
        }
        Ok(Self { positions, colors })
    }

    pub fn empty() -> Self {
        Self { positions: Vec::new(), colors: None }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[Vector3<f64>]> {
        self.colors.as_deref()
    }

    /// Mean position; `None` for an empty cloud.
    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.positions.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.positions.iter().sum();
        Some(sum / self.positions.len() as f64)
    }
}

/// Per-pixel depth in meters with a validity flag per pixel.
///
/// Depth is the Euclidean distance from the camera center along the pixel
/// ray (not the camera-frame z), matching [`back_project`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        if values.len() != n || valid.len() != n {
            return Err(Error::domain(format!(
                "depth buffers sized {}/{} for {}x{} map",
                values.len(),
                valid.len(),
                width,
                height
            )));
        }
        for (d, &ok) in values.iter().zip(&valid) {
            if ok && !(d.is_finite() && *d > 0.0) {
                return Err(Error::domain(format!("valid depth entry {d} must be finite and > 0")));
            }
        }
        Ok(Self { width, height, values, valid })
    }

    /// All-invalid map.
    pub fn invalid(width: u32, height: u32) -> Self {
        let n = (width as usize) * (height as usize);
        Self { width, height, values: vec![0.0; n], valid: vec![false; n] }
    }

    pub fn constant(width: u32, height: u32, depth: f64) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        Self::new(width, height, vec![depth; n], vec![true; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, v: u32, u: u32) -> Option<f64> {
        let i = (v * self.width + u) as usize;
        self.valid[i].then(|| self.values[i])
    }

    pub fn is_valid(&self, v: u32, u: u32) -> bool {
        self.valid[(v * self.width + u) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_flags(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }
}

/// Boolean coverage image from point-cloud rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask {
    width: u32,
    height: u32,
    filled: Vec<bool>,
    fill_ratio: f64,
}

impl VisibilityMask {
    pub fn new(width: u32, height: u32, filled: Vec<bool>) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        if filled.len() != n || n == 0 {
            return Err(Error::domain(format!(
                "mask buffer length {} for {}x{} mask",
                filled.len(),
                width,
                height
            )));
        }
        let count = filled.iter().filter(|&&b| b).count();
        let fill_ratio = count as f64 / n as f64;
        Ok(Self { width, height, filled, fill_ratio })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn fill_ratio(&self) -> f64 {
        self.fill_ratio
    }

    pub fn filled(&self) -> &[bool] {
        &self.filled
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&b| b).count()
    }

    pub fn empty_count(&self) -> usize {
        self.filled.len() - self.filled_count()
    }
}

/// One world point per valid depth pixel: center + depth * ray direction.
///
/// Pixel (u, v) is sampled at integer coordinates, so re-projecting the
/// output lands back on the source pixels.
pub fn back_project(
    depth: &DepthMap,
    pose: &CameraPose,
    intr: &Intrinsics,
    colors: Option<&ColorImage>,
) -> Result<PointCloud> {
    if depth.width != intr.width || depth.height != intr.height {
        return Err(Error::domain(format!(
            "depth {}x{} does not match intrinsics {}x{}",
            depth.width, depth.height, intr.width, intr.height
        )));
    }
    if let Some(img) = colors {
        if img.width() != intr.width || img.height() != intr.height {
            return Err(Error::domain("color image does not match intrinsics".to_string()));
        }
    }
    let mut positions = Vec::new();
    let mut cols = colors.map(|_| Vec::new());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let Some(d) = depth.get(v, u) else { continue };
            let ray = pixel_ray(pose, intr, u as f64, v as f64, RayMode::Standard)?;
            positions.push(ray.at(d));
            if let (Some(out), Some(img)) = (&mut cols, colors) {
                out.push(img.get(v, u));
            }
        }
    }
    PointCloud::new(positions, cols)
}

/// Z-buffer splat rendering of a point cloud.
///
/// Each point with positive camera-frame z projects to the nearest pixel
/// plus every pixel center within `point_radius_px` of the projection; the
/// smallest camera distance wins per pixel, ties going to the lowest point
/// index. Returns the coverage mask and the winning depths.
pub fn render_mask(
    cloud: &PointCloud,
    pose: &CameraPose,
    intr: &Intrinsics,
    point_radius_px: f64,
) -> Result<(VisibilityMask, DepthMap)> {
    if point_radius_px < 0.0 {
        return Err(Error::domain(format!("point radius {point_radius_px} < 0")));
    }
    let w = intr.width as usize;
    let h = intr.height as usize;
    let mut best = vec![f64::INFINITY; w * h];

    for p in cloud.positions() {
        let pc = pose.world_to_camera(p);
        if pc.z <= 0.0 {
            continue;
        }
        let u = intr.fx * pc.x / pc.z + intr.cx;
        let v = intr.fy * pc.y / pc.z + intr.cy;
        let dist = (p - pose.center()).norm();
        let mut stamp = |iu: i64, iv: i64| {
            if iu < 0 || iv < 0 || iu >= w as i64 || iv >= h as i64 {
                return;
            }
            let idx = iv as usize * w + iu as usize;
            if dist < best[idx] {
                best[idx] = dist;
            }
        };
        stamp(u.round() as i64, v.round() as i64);
        if point_radius_px > 0.0 {
            let r2 = point_radius_px * point_radius_px;
            for iv in (v - point_radius_px).ceil() as i64..=(v + point_radius_px).floor() as i64 {
                for iu in (u - point_radius_px).ceil() as i64..=(u + point_radius_px).floor() as i64
                {
                    let du = iu as f64 - u;
                    let dv = iv as f64 - v;
                    if du * du + dv * dv <= r2 {
                        stamp(iu, iv);
                    }
                }
            }
        }
    }

    let filled: Vec<bool> = best.iter().map(|d| d.is_finite()).collect();
    let values: Vec<f64> = best.iter().map(|d| if d.is_finite() { *d } else { 0.0 }).collect();
    let mask = VisibilityMask::new(intr.width, intr.height, filled.clone())?;
    let depth = DepthMap::new(intr.width, intr.height, values, filled)?;
    Ok((mask, depth))
}

fn voxel_key(p: &Vector3<f64>, voxel_size: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

/// Union of two clouds deduplicated on a voxel grid; the first point to
/// claim a voxel is kept (base before addition), so merging is order-stable.
pub fn merge(base: &PointCloud, addition: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    if !(voxel_size > 0.0) {
        return Err(Error::domain(format!("voxel size {voxel_size} must be > 0")));
    }
    let mut seen: HashMap<(i64, i64, i64), ()> =
        HashMap::with_capacity(base.len() + addition.len());
    let mut positions = Vec::new();
    let mut colors: Vec<Option<Vector3<f64>>> = Vec::new();
    for cloud in [base, addition] {
        for (i, p) in cloud.positions().iter().enumerate() {
            if seen.insert(voxel_key(p, voxel_size), ()).is_none() {
                positions.push(*p);
                colors.push(cloud.colors().map(|c| c[i]));
            }
        }
    }
    let colors = if colors.iter().all(|c| c.is_some()) && !colors.is_empty() {
        Some(colors.into_iter().map(|c| c.unwrap()).collect())
    } else {
        None
    };
    PointCloud::new(positions, colors)
}

/// Builds the exact nearest-neighbor index over a cloud's positions.
pub fn build_index(cloud: &PointCloud) -> SpatialIndex {
    SpatialIndex::from_points(cloud.positions())
}

/// Minimum Euclidean distance from `p` to the indexed cloud.
pub fn min_distance(index: &SpatialIndex, p: &Vector3<f64>) -> f64 {
    index.min_distance(p)
}
