//! Scale/bias calibration of relative depth against absolute depth.
//!
//! The fit runs in inverse-depth space: find scale and bias minimizing
//! || mask * (scale / d_m + bias - 1 / d_v) ||^2. The objective is linear in
//! (scale, bias) over the basis (1/d_m, 1), so the 2x2 normal equations give
//! the exact optimum in closed form. Pixel reductions use compensated
//! summation in a fixed row-major order so results are bit-reproducible.

use crate::cloud::DepthMap;
use crate::error::{Error, Result};

/// Condition-number limit on the 2x2 normal matrix before the fit is
/// declared degenerate.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    /// Multiplier on inverse relative depth.
    pub scale: f64,
    /// Additive inverse-depth offset.
    pub bias: f64,
    /// Root-mean-square inverse-depth residual over the fitted pixels.
    pub residual: f64,
    pub pixels_used: usize,
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn usable(d_m: &DepthMap, d_v: &DepthMap, mask: &[bool], i: usize) -> bool {
    mask[i] && d_m.valid_flags()[i] && d_v.valid_flags()[i]
}

/// Closed-form inverse-depth calibration of `d_m` (relative) against `d_v`
/// (absolute) over `mask`.
pub fn calibrate(d_m: &DepthMap, d_v: &DepthMap, mask: &[bool]) -> Result<CalibrationParams> {
    let n_px = d_m.values().len();
    if d_v.values().len() != n_px || mask.len() != n_px || d_m.width() != d_v.width() {
        return Err(Error::domain(format!(
            "calibration shapes differ: {}x{} vs {}x{} vs mask {}",
            d_m.width(),
            d_m.height(),
            d_v.width(),
            d_v.height(),
            mask.len()
        )));
    }

    let mut sxx = Kahan::default();
    let mut sx = Kahan::default();
    let mut sxy = Kahan::default();
    let mut sy = Kahan::default();
    let mut count = 0usize;
    for i in 0..n_px {
        if !usable(d_m, d_v, mask, i) {
            continue;
        }
        let x = 1.0 / d_m.values()[i];
        let y = 1.0 / d_v.values()[i];
        sxx.add(x * x);
        sx.add(x);
        sxy.add(x * y);
        sy.add(y);
        count += 1;
    }
    if count < 2 {
        return Err(Error::domain(format!("calibration needs >= 2 usable pixels, got {count}")));
    }

    // Normal matrix [[sxx, sx], [sx, n]]; symmetric PSD, so its eigenvalues
    // give the condition number directly.
    let (a, b, d) = (sxx.value(), sx.value(), count as f64);
    let mean = (a + d) / 2.0;
    let delta = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    let lambda_min = mean - delta;
    let lambda_max = mean + delta;
    if !(lambda_min > 0.0) || lambda_max / lambda_min > MAX_CONDITION {
        return Err(Error::degenerate(format!(
            "normal equations ill-conditioned (eigenvalues {lambda_min:.3e}, {lambda_max:.3e}); \
             is 1/d_m constant over the mask?"
        )));
    }

    let (scale, bias) = solve_2x2_pivoted(a, b, b, d, sxy.value(), sy.value());

    let mut sq = Kahan::default();
    for i in 0..n_px {
        if !usable(d_m, d_v, mask, i) {
            continue;
        }
        let r = scale / d_m.values()[i] + bias - 1.0 / d_v.values()[i];
        sq.add(r * r);
    }
    let residual = (sq.value() / count as f64).max(0.0).sqrt();

    Ok(CalibrationParams { scale, bias, residual, pixels_used: count })
}

/// Gaussian elimination with partial pivoting on [[a, b], [c, d]] x = [e, f].
fn solve_2x2_pivoted(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> (f64, f64) {
    if a.abs() >= c.abs() {
        let m = c / a;
        let d2 = d - m * b;
        let f2 = f - m * e;
        let x1 = f2 / d2;
        let x0 = (e - b * x1) / a;
        (x0, x1)
    } else {
        let m = a / c;
        let b2 = b - m * d;
        let e2 = e - m * f;
        let x1 = e2 / b2;
        let x0 = (f - d * x1) / c;
        (x0, x1)
    }
}

/// Applies calibration: output depth is 1 / (scale / d_m + bias) per valid
/// pixel; pixels whose calibrated inverse depth is non-positive become
/// invalid rather than surfacing as negative depth.
pub fn apply_calibration(d_m: &DepthMap, params: &CalibrationParams) -> Result<DepthMap> {
    if !(params.scale.is_finite() && params.bias.is_finite()) {
        return Err(Error::domain(format!(
            "calibration parameters must be finite, got ({}, {})",
            params.scale, params.bias
        )));
    }
    let n = d_m.values().len();
    let mut values = vec![0.0; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        if !d_m.valid_flags()[i] {
            continue;
        }
        let inv = params.scale / d_m.values()[i] + params.bias;
        if inv > 0.0 && inv.is_finite() {
            values[i] = 1.0 / inv;
            valid[i] = true;
        }
    }
    DepthMap::new(d_m.width(), d_m.height(), values, valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_depth(w: u32, h: u32, f: impl Fn(u32, u32) -> f64) -> DepthMap {
        let mut values = Vec::new();
        for v in 0..h {
            for u in 0..w {
                values.push(f(u, v));
            }
        }
        let n = values.len();
        DepthMap::new(w, h, values, vec![true; n]).unwrap()
    }

    /// Exhaustive grid search over (scale, bias) on the same objective;
    /// evaluated from independently accumulated sufficient statistics.
    fn grid_search(
        d_m: &DepthMap,
        d_v: &DepthMap,
        mask: &[bool],
        scale_range: (f64, f64),
        bias_range: (f64, f64),
        step: f64,
    ) -> (f64, f64) {
        let (mut sxx, mut sx, mut sxy, mut sy, mut syy, mut n) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..mask.len() {
            if !usable(d_m, d_v, mask, i) {
                continue;
            }
            let x = 1.0 / d_m.values()[i];
            let y = 1.0 / d_v.values()[i];
            sxx += x * x;
            sx += x;
            sxy += x * y;
            sy += y;
            syy += y * y;
            n += 1.0;
        }
        let objective = |s: f64, b: f64| {
            s * s * sxx + 2.0 * s * b * sx + b * b * n - 2.0 * s * sxy - 2.0 * b * sy + syy
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let scales = ((scale_range.1 - scale_range.0) / step).round() as usize;
        let biases = ((bias_range.1 - bias_range.0) / step).round() as usize;
        for i in 0..=scales {
            let s = scale_range.0 + i as f64 * step;
            for j in 0..=biases {
                let b = bias_range.0 + j as f64 * step;
                let obj = objective(s, b);
                if obj < best.0 {
                    best = (obj, s, b);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn identity_fit() {
        let d = grid_depth(16, 16, |u, v| 1.0 + 0.07 * u as f64 + 0.03 * v as f64);
        let mask = vec![true; 256];
        let p = calibrate(&d, &d, &mask).unwrap();
        assert!((p.scale - 1.0).abs() < 1e-12);
        assert!(p.bias.abs() < 1e-12);
        assert!(p.residual < 1e-12);
        assert_eq!(p.pixels_used, 256);
    }

    #[test]
    fn recovers_constructed_scale_bias() {
        // 1/d_v = 2 * (1/d_m) + 0.1 exactly.
        let d_m = grid_depth(32, 32, |u, v| 0.8 + 0.05 * u as f64 + 0.02 * v as f64);
        let inv_v: Vec<f64> = d_m.values().iter().map(|d| 2.0 / d + 0.1).collect();
        let d_v = grid_depth(32, 32, |u, v| 1.0 / inv_v[(v * 32 + u) as usize]);
        let mask = vec![true; 1024];
        let p = calibrate(&d_m, &d_v, &mask).unwrap();
        assert!((p.scale - 2.0).abs() < 1e-9, "scale {}", p.scale);
        assert!((p.bias - 0.1).abs() < 1e-9, "bias {}", p.bias);
    }

    #[test]
    fn matches_grid_search_on_noisy_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d_m = grid_depth(24, 24, |u, v| 1.2 + 0.04 * u as f64 + 0.06 * v as f64);
        let d_v = {
            let mut values = Vec::new();
            for i in 0..576 {
                let inv = 1.7 / d_m.values()[i] + 0.23 + rng.random_range(-0.02..0.02);
                values.push(1.0 / inv);
            }
            DepthMap::new(24, 24, values, vec![true; 576]).unwrap()
        };
        let mask = vec![true; 576];
        let p = calibrate(&d_m, &d_v, &mask).unwrap();
        let (gs, gb) = grid_search(&d_m, &d_v, &mask, (0.1, 5.0), (-1.0, 1.0), 1e-2);
        assert!((p.scale - gs).abs() <= 1e-2 + 1e-12, "scale {} vs grid {gs}", p.scale);
        assert!((p.bias - gb).abs() <= 1e-2 + 1e-12, "bias {} vs grid {gb}", p.bias);
    }

    #[test]
    fn rescaling_input_compensates() {
        let d_m = grid_depth(16, 16, |u, v| 0.9 + 0.03 * u as f64 + 0.05 * v as f64);
        let d_v = grid_depth(16, 16, |u, v| 1.4 + 0.02 * u as f64 + 0.04 * v as f64);
        let mask = vec![true; 256];
        let p1 = calibrate(&d_m, &d_v, &mask).unwrap();
        let c = 3.0;
        let scaled = grid_depth(16, 16, |u, v| c * d_m.get(v, u).unwrap());
        let p2 = calibrate(&scaled, &d_v, &mask).unwrap();
        assert!((p2.scale - c * p1.scale).abs() < 1e-9);
        assert!((p2.bias - p1.bias).abs() < 1e-9);
        assert!((p2.residual - p1.residual).abs() < 1e-9);
    }

    #[test]
    fn masked_pixels_have_zero_influence() {
        let d_m = grid_depth(16, 16, |u, v| 1.0 + 0.05 * u as f64 + 0.01 * v as f64);
        let d_v = grid_depth(16, 16, |u, v| 1.3 + 0.02 * u as f64 + 0.03 * v as f64);
        let mask: Vec<bool> = (0..256).map(|i| i % 3 != 0).collect();
        let p1 = calibrate(&d_m, &d_v, &mask).unwrap();
        // Arbitrary garbage on masked-out pixels.
        let d_m2 = grid_depth(16, 16, |u, v| {
            if ((v * 16 + u) as usize).is_multiple_of(3) {
                777.0 + u as f64
            } else {
                1.0 + 0.05 * u as f64 + 0.01 * v as f64
            }
        });
        let p2 = calibrate(&d_m2, &d_v, &mask).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn too_few_pixels_rejected() {
        let d = grid_depth(4, 4, |_, _| 1.0);
        let mut mask = vec![false; 16];
        mask[3] = true;
        assert!(matches!(calibrate(&d, &d, &mask), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_inverse_depth_degenerate() {
        let d_m = grid_depth(8, 8, |_, _| 2.0);
        let d_v = grid_depth(8, 8, |u, v| 1.0 + 0.1 * (u + v) as f64);
        let mask = vec![true; 64];
        assert!(matches!(calibrate(&d_m, &d_v, &mask), Err(Error::Degenerate(_))));
    }

    #[test]
    fn apply_identity() {
        let d = grid_depth(8, 8, |u, _| 1.0 + u as f64);
        let p = CalibrationParams { scale: 1.0, bias: 0.0, residual: 0.0, pixels_used: 64 };
        assert_eq!(apply_calibration(&d, &p).unwrap(), d);
    }

    #[test]
    fn apply_scale_two() {
        let d = grid_depth(2, 2, |_, _| 2.0);
        let p = CalibrationParams { scale: 2.0, bias: 0.0, residual: 0.0, pixels_used: 4 };
        let out = apply_calibration(&d, &p).unwrap();
        assert_eq!(out.get(0, 0), Some(1.0));
    }

    #[test]
    fn apply_invalidates_nonpositive_inverse() {
        let d = grid_depth(2, 2, |_, _| 2.0);
        let p = CalibrationParams { scale: 1.0, bias: -0.6, residual: 0.0, pixels_used: 4 };
        let out = apply_calibration(&d, &p).unwrap();
        // 1/2 - 0.6 = -0.1: every pixel must be dropped, not negative.
        assert_eq!(out.valid_count(), 0);
    }

    #[test]
    fn closed_form_beats_grid_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..3 {
            let base: Vec<f64> = (0..144).map(|_| rng.random_range(0.7..4.0)).collect();
            let d_m = DepthMap::new(12, 12, base.clone(), vec![true; 144]).unwrap();
            let values: Vec<f64> = base
                .iter()
                .map(|d| 1.0 / (rng.random_range(0.5..2.5) / d + 0.05))
                .collect();
            let d_v = DepthMap::new(12, 12, values, vec![true; 144]).unwrap();
            let mask = vec![true; 144];
            let p = calibrate(&d_m, &d_v, &mask).unwrap();
            let closed_obj: f64 = (0..144)
                .map(|i| {
                    let r = p.scale / d_m.values()[i] + p.bias - 1.0 / d_v.values()[i];
                    r * r
                })
                .sum();
            for si in 0..=20 {
                for bi in 0..=20 {
                    let s = 0.1 + si as f64 * 0.245;
                    let b = -1.0 + bi as f64 * 0.1;
                    let obj: f64 = (0..144)
                        .map(|i| {
                            let r = s / d_m.values()[i] + b - 1.0 / d_v.values()[i];
                            r * r
                        })
                        .sum();
                    assert!(closed_obj <= obj + 1e-9);
                }
            }
        }
    }
}
