//! File formats: binary little-endian PLY clouds, NAVD raw depth maps,
//! trajectory JSON, PNG images, and the planning-run output directory.
//!
//! NAVD depth layout: magic `NAVD`, u32 width, u32 height, u32 reserved
//! (all little-endian), then width*height row-major f32 depths. Values that
//! are non-positive or non-finite mark invalid pixels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraPose, Intrinsics, Trajectory};
use crate::cloud::{DepthMap, PointCloud};
use crate::color::ColorImage;
use crate::error::{Error, Result};
use crate::planner::PlanResult;

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

/// Writes a binary little-endian PLY with float x/y/z and, when the cloud
/// is colored, uchar red/green/blue.
pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let colored = cloud.colors().is_some();
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if colored {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes())?;
    for (i, p) in cloud.positions().iter().enumerate() {
        for v in [p.x as f32, p.y as f32, p.z as f32] {
            out.write_all(&v.to_le_bytes())?;
        }
        if let Some(colors) = cloud.colors() {
            let c = colors[i];
            out.write_all(&[quantize(c.x), quantize(c.y), quantize(c.z)])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn quantize(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Reads PLY files produced by [`write_ply`] (vertex element with float
/// x/y/z and optional uchar red/green/blue).
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;

    let header_end = find_subsequence(&bytes, b"end_header\n")
        .ok_or_else(|| Error::format("PLY header has no end_header".to_string()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::format("PLY header is not UTF-8".to_string()))?;
    let body = &bytes[header_end + b"end_header\n".len()..];

    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::format("missing ply magic".to_string()));
    }
    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<(String, String)> = Vec::new();
    let mut format_ok = false;
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if line.trim() != "format binary_little_endian 1.0" {
                    return Err(Error::format(format!("unsupported PLY format line: {line}")));
                }
                format_ok = true;
            }
            Some("comment") => {}
            Some("element") => {
                let kind = tok.next().unwrap_or_default();
                if kind != "vertex" {
                    return Err(Error::format(format!("unsupported PLY element: {kind}")));
                }
                vertex_count = Some(
                    tok.next()
                        .and_then(|n| n.parse().ok())
                        .ok_or_else(|| Error::format("bad vertex count".to_string()))?,
                );
            }
            Some("property") => {
                let ty = tok.next().unwrap_or_default().to_string();
                let name = tok.next().unwrap_or_default().to_string();
                properties.push((ty, name));
            }
            Some(other) => {
                return Err(Error::format(format!("unsupported PLY header entry: {other}")))
            }
            None => {}
        }
    }
    if !format_ok {
        return Err(Error::format("PLY missing format line".to_string()));
    }
    let n = vertex_count.ok_or_else(|| Error::format("PLY missing vertex element".to_string()))?;

    let plain: Vec<(&str, &str)> =
        properties.iter().map(|(t, n)| (t.as_str(), n.as_str())).collect();
    let colored = match plain.as_slice() {
        [("float", "x"), ("float", "y"), ("float", "z")] => false,
        [("float", "x"), ("float", "y"), ("float", "z"), ("uchar", "red"), ("uchar", "green"), ("uchar", "blue")] => {
            true
        }
        _ => {
            return Err(Error::format(format!("unsupported PLY property layout: {properties:?}")))
        }
    };
    let stride = 12 + if colored { 3 } else { 0 };
    if body.len() < n * stride {
        return Err(Error::format(format!(
            "PLY body holds {} bytes, expected {}",
            body.len(),
            n * stride
        )));
    }

    let mut positions = Vec::with_capacity(n);
    let mut colors = colored.then(Vec::new);
    for i in 0..n {
        let at = i * stride;
        let x = f32::from_le_bytes(body[at..at + 4].try_into().unwrap());
        let y = f32::from_le_bytes(body[at + 4..at + 8].try_into().unwrap());
        let z = f32::from_le_bytes(body[at + 8..at + 12].try_into().unwrap());
        positions.push(Vector3::new(x as f64, y as f64, z as f64));
        if let Some(cols) = &mut colors {
            cols.push(Vector3::new(
                body[at + 12] as f64 / 255.0,
                body[at + 13] as f64 / 255.0,
                body[at + 14] as f64 / 255.0,
            ));
        }
    }
    PointCloud::new(positions, colors)
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

// ---------------------------------------------------------------------------
// NAVD depth
// ---------------------------------------------------------------------------

const DEPTH_MAGIC: &[u8; 4] = b"NAVD";

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(DEPTH_MAGIC)?;
    out.write_all(&depth.width().to_le_bytes())?;
    out.write_all(&depth.height().to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    for i in 0..depth.values().len() {
        let v = if depth.valid_flags()[i] { depth.values()[i] as f32 } else { 0.0f32 };
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[0..4] != DEPTH_MAGIC {
        return Err(Error::format(format!("{} is not a NAVD depth file", path.display())));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let n = (width as usize) * (height as usize);
    if bytes.len() != 16 + 4 * n {
        return Err(Error::format(format!(
            "NAVD payload is {} bytes, expected {}",
            bytes.len() - 16,
            4 * n
        )));
    }
    let mut values = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let at = 16 + 4 * i;
        let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64;
        let ok = v.is_finite() && v > 0.0;
        values.push(if ok { v } else { 0.0 });
        valid.push(ok);
    }
    DepthMap::new(width, height, values, valid)
}

// ---------------------------------------------------------------------------
// Trajectory JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TrajectoryFile {
    frames: Vec<FrameRecord>,
    intrinsics: IntrinsicsRecord,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    /// Row-major camera-to-world rotation.
    rotation: [f64; 9],
    center: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

pub fn trajectory_to_json(traj: &Trajectory, intr: &Intrinsics) -> String {
    let frames = traj
        .poses()
        .iter()
        .map(|p| {
            let r = p.rotation();
            FrameRecord {
                rotation: [
                    r[(0, 0)], r[(0, 1)], r[(0, 2)],
                    r[(1, 0)], r[(1, 1)], r[(1, 2)],
                    r[(2, 0)], r[(2, 1)], r[(2, 2)],
                ],
                center: p.center().into(),
            }
        })
        .collect();
    let file = TrajectoryFile {
        frames,
        intrinsics: IntrinsicsRecord {
            fx: intr.fx,
            fy: intr.fy,
            cx: intr.cx,
            cy: intr.cy,
            width: intr.width,
            height: intr.height,
        },
    };
    serde_json::to_string_pretty(&file).expect("trajectory serializes")
}

pub fn trajectory_from_json(text: &str) -> Result<(Trajectory, Intrinsics)> {
    let file: TrajectoryFile = serde_json::from_str(text)?;
    let intr = Intrinsics::new(
        file.intrinsics.fx,
        file.intrinsics.fy,
        file.intrinsics.cx,
        file.intrinsics.cy,
        file.intrinsics.width,
        file.intrinsics.height,
    )?;
    let poses = file
        .frames
        .iter()
        .map(|f| {
            let r = &f.rotation;
            let rotation = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
            CameraPose::new(rotation, Vector3::from(f.center))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Trajectory::new(poses)?, intr))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, intr: &Intrinsics) -> Result<()> {
    std::fs::write(path, trajectory_to_json(traj, intr))?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<(Trajectory, Intrinsics)> {
    trajectory_from_json(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

pub fn write_png(path: &Path, img: &ColorImage) -> Result<()> {
    let mut buf = image::RgbImage::new(img.width(), img.height());
    for v in 0..img.height() {
        for u in 0..img.width() {
            let c = img.get(v, u);
            buf.put_pixel(u, v, image::Rgb([quantize(c.x), quantize(c.y), quantize(c.z)]));
        }
    }
    buf.save(path)?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<ColorImage> {
    let img = image::open(path)?.to_rgb8();
    let mut data = Vec::with_capacity((img.width() * img.height()) as usize);
    for v in 0..img.height() {
        for u in 0..img.width() {
            let p = img.get_pixel(u, v);
            data.push(Vector3::new(
                p[0] as f64 / 255.0,
                p[1] as f64 / 255.0,
                p[2] as f64 / 255.0,
            ));
        }
    }
    ColorImage::new(img.width(), img.height(), data)
}

/// Reads a PNG as a boolean mask: a pixel is masked in when its luma is at
/// least 128.
pub fn read_mask_png(path: &Path) -> Result<(Vec<bool>, u32, u32)> {
    let img = image::open(path)?.to_luma8();
    let mut mask = Vec::with_capacity((img.width() * img.height()) as usize);
    for v in 0..img.height() {
        for u in 0..img.width() {
            mask.push(img.get_pixel(u, v)[0] >= 128);
        }
    }
    Ok((mask, img.width(), img.height()))
}

// ---------------------------------------------------------------------------
// Planning-run directory
// ---------------------------------------------------------------------------

/// Writes a planning result as a directory tree:
/// `segment_XX.json` trajectories, `step_XX.json` reports,
/// `final_cloud.ply`, and `views/` PNG + NAVD pairs (plus the initial view).
/// Layout and contents are deterministic.
pub fn save_plan_result(dir: &Path, result: &PlanResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let views_dir = dir.join("views");
    std::fs::create_dir_all(&views_dir)?;

    let intr = result.initial_view.intrinsics;
    for (i, segment) in result.segments.iter().enumerate() {
        write_trajectory(&dir.join(format!("segment_{i:02}.json")), segment, &intr)?;
    }
    for report in &result.reports {
        let path = dir.join(format!("step_{:02}.json", report.step));
        std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    }
    write_ply(&dir.join("final_cloud.ply"), &result.final_cloud)?;

    write_png(&views_dir.join("init.png"), &result.initial_view.image)?;
    write_depth(&views_dir.join("init.navd"), &result.initial_view.depth)?;
    for (s, views) in result.views.iter().enumerate() {
        for (f, view) in views.iter().enumerate() {
            write_png(&views_dir.join(format!("seg{s:02}_f{f:03}.png")), &view.image)?;
            write_depth(&views_dir.join(format!("seg{s:02}_f{f:03}.navd")), &view.depth)?;
        }
    }

    let summary = serde_json::json!({
        "segments": result.segments.len(),
        "final_cloud_points": result.final_cloud.len(),
        "failed": result.failed,
        "failure": result.failure,
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
