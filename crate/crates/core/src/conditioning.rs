//! Toy-scale camera-conditioning tensor ops: a strided 3D convolutional
//! adapter over Plücker ray images, additive feature injection, and low-rank
//! query modulation. Shape- and invariant-tested; there is no training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::PluckerImage;
use crate::error::{Error, Result};

/// Dense T x H x W x C value grid (channel-minor layout).
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    values: Vec<f64>,
}

impl TokenGrid {
    pub fn new(t: usize, h: usize, w: usize, c: usize, values: Vec<f64>) -> Result<Self> {
        if t == 0 || h == 0 || w == 0 || c == 0 {
            return Err(Error::domain(format!("token grid {t}x{h}x{w}x{c} must be nonempty")));
        }
        if values.len() != t * h * w * c {
            return Err(Error::domain(format!(
                "token grid values {} != {t}x{h}x{w}x{c}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("token grid values must be finite".to_string()));
        }
        Ok(Self { t, h, w, c, values })
    }

    pub fn zeros(t: usize, h: usize, w: usize, c: usize) -> Result<Self> {
        Self::new(t, h, w, c, vec![0.0; t * h * w * c])
    }

    /// Plücker image as a 6-channel grid (moment then direction).
    pub fn from_plucker(p: &PluckerImage) -> Self {
        let values = p.as_slice().iter().flatten().copied().collect();
        Self {
            t: p.frames(),
            h: p.height(),
            w: p.width(),
            c: 6,
            values,
        }
    }

    #[inline]
    fn idx(&self, t: usize, h: usize, w: usize, c: usize) -> usize {
        ((t * self.h + h) * self.w + w) * self.c + c
    }

    pub fn get(&self, t: usize, h: usize, w: usize, c: usize) -> f64 {
        self.values[self.idx(t, h, w, c)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.t == other.t && self.h == other.h && self.w == other.w && self.c == other.c
    }
}

/// Strided 3D convolution weights mapping `in_channels` to `out_channels`.
///
/// Kernel layout is `[kt][kh][kw][cin][cout]`; inputs are zero-padded by
/// `(k - 1) / 2` per dimension, so the output extent along each axis is
/// `floor((n + 2p - k) / stride) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvAdapter {
    pub kernel_dims: [usize; 3],
    pub in_channels: usize,
    pub out_channels: usize,
    pub strides: [usize; 3],
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvAdapter {
    pub fn new(
        kernel_dims: [usize; 3],
        in_channels: usize,
        out_channels: usize,
        strides: [usize; 3],
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kernel_dims.contains(&0) || strides.contains(&0) {
            return Err(Error::domain("kernel dims and strides must be positive".to_string()));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::domain("channel counts must be positive".to_string()));
        }
        let expected = kernel_dims.iter().product::<usize>() * in_channels * out_channels;
        if weights.len() != expected {
            return Err(Error::domain(format!(
                "kernel weights {} != expected {expected}",
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::domain(format!(
                "bias length {} != out channels {out_channels}",
                bias.len()
            )));
        }
        Ok(Self { kernel_dims, in_channels, out_channels, strides, weights, bias })
    }

    /// Identity adapter: 1x1x1 kernel wiring channel i to channel i.
    pub fn identity(channels: usize) -> Result<Self> {
        let mut weights = vec![0.0; channels * channels];
        for c in 0..channels {
            weights[c * channels + c] = 1.0;
        }
        Self::new([1, 1, 1], channels, channels, [1, 1, 1], weights, vec![0.0; channels])
    }

    /// Deterministic seeded initialization (uniform in [-0.1, 0.1]).
    pub fn seeded(
        kernel_dims: [usize; 3],
        in_channels: usize,
        out_channels: usize,
        strides: [usize; 3],
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = kernel_dims.iter().product::<usize>() * in_channels * out_channels;
        let weights = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let bias = (0..out_channels).map(|_| rng.random_range(-0.1..0.1)).collect();
        Self::new(kernel_dims, in_channels, out_channels, strides, weights, bias)
    }

    #[inline]
    fn weight(&self, kt: usize, kh: usize, kw: usize, ci: usize, co: usize) -> f64 {
        let [_, kdh, kdw] = self.kernel_dims;
        self.weights[(((kt * kdh + kh) * kdw + kw) * self.in_channels + ci) * self.out_channels + co]
    }

    fn out_extent(&self, input: [usize; 3]) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let pad = (self.kernel_dims[a] - 1) / 2;
            let padded = input[a] + 2 * pad;
            out[a] = if padded >= self.kernel_dims[a] {
                (padded - self.kernel_dims[a]) / self.strides[a] + 1
            } else {
                0
            };
        }
        out
    }
}

/// Encodes a Plücker ray image into camera feature tokens: a strided 3D
/// convolution plus bias.
///
/// Taps accumulate in (kt, kh, kw, channel) order with zero padding skipped,
/// and the bias is added after the taps; a naive loop following that order
/// reproduces the output bit for bit.
pub fn encode_camera(p: &PluckerImage, adapter: &ConvAdapter) -> Result<TokenGrid> {
    if adapter.in_channels != 6 {
        return Err(Error::domain(format!(
            "adapter expects {} input channels, Plücker images have 6",
            adapter.in_channels
        )));
    }
    let input = TokenGrid::from_plucker(p);
    convolve(&input, adapter)
}

/// Strided 3D convolution of an arbitrary token grid.
pub fn convolve(input: &TokenGrid, adapter: &ConvAdapter) -> Result<TokenGrid> {
    if input.c != adapter.in_channels {
        return Err(Error::domain(format!(
            "input has {} channels, adapter expects {}",
            input.c, adapter.in_channels
        )));
    }
    let [kt, kh, kw] = adapter.kernel_dims;
    let [st, sh, sw] = adapter.strides;
    let [ot, oh, ow] = adapter.out_extent([input.t, input.h, input.w]);
    if ot == 0 || oh == 0 || ow == 0 {
        return Err(Error::domain("convolution output is empty".to_string()));
    }
    let (pt, ph, pw) = ((kt - 1) / 2, (kh - 1) / 2, (kw - 1) / 2);
    let mut values = Vec::with_capacity(ot * oh * ow * adapter.out_channels);
    for t in 0..ot {
        for h in 0..oh {
            for w in 0..ow {
                for co in 0..adapter.out_channels {
                    let mut acc = 0.0;
                    for dt in 0..kt {
                        let it = (t * st + dt) as isize - pt as isize;
                        if it < 0 || it >= input.t as isize {
                            continue;
                        }
                        for dh in 0..kh {
                            let ih = (h * sh + dh) as isize - ph as isize;
                            if ih < 0 || ih >= input.h as isize {
                                continue;
                            }
                            for dw in 0..kw {
                                let iw = (w * sw + dw) as isize - pw as isize;
                                if iw < 0 || iw >= input.w as isize {
                                    continue;
                                }
                                for ci in 0..adapter.in_channels {
                                    acc += adapter.weight(dt, dh, dw, ci, co)
                                        * input.get(it as usize, ih as usize, iw as usize, ci);
                                }
                            }
                        }
                    }
                    values.push(acc + adapter.bias[co]);
                }
            }
        }
    }
    TokenGrid::new(ot, oh, ow, adapter.out_channels, values)
}

/// Elementwise additive injection of camera features into video tokens.
pub fn inject(x_v: &TokenGrid, x_c: &TokenGrid) -> Result<TokenGrid> {
    if !x_v.same_shape(x_c) {
        return Err(Error::domain(format!(
            "injection shapes differ: {}x{}x{}x{} vs {}x{}x{}x{}",
            x_v.t, x_v.h, x_v.w, x_v.c, x_c.t, x_c.h, x_c.w, x_c.c
        )));
    }
    let values = x_v.values.iter().zip(&x_c.values).map(|(a, b)| a + b).collect();
    TokenGrid::new(x_v.t, x_v.h, x_v.w, x_v.c, values)
}

/// Low-rank modulation weights: down-projection (rank x C), up-projection
/// (C x rank), and modulation strength alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraWeights {
    pub rank: usize,
    pub channels: usize,
    /// rank x channels, row-major.
    pub down: Vec<f64>,
    /// channels x rank, row-major.
    pub up: Vec<f64>,
    pub alpha: f64,
}

impl LoraWeights {
    pub fn new(rank: usize, channels: usize, down: Vec<f64>, up: Vec<f64>, alpha: f64) -> Result<Self> {
        if rank == 0 || rank >= channels {
            return Err(Error::domain(format!("rank {rank} must be in [1, channels {channels})")));
        }
        if down.len() != rank * channels || up.len() != channels * rank {
            return Err(Error::domain(format!(
                "projection sizes {}/{} != rank {rank} x channels {channels}",
                down.len(),
                up.len()
            )));
        }
        if !(alpha >= 0.0) {
            return Err(Error::domain(format!("alpha {alpha} must be >= 0")));
        }
        Ok(Self { rank, channels, down, up, alpha })
    }

    /// Deterministic seeded initialization (uniform in [-0.1, 0.1]).
    pub fn seeded(rank: usize, channels: usize, alpha: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let down = (0..rank * channels).map(|_| rng.random_range(-0.1..0.1)).collect();
        let up = (0..channels * rank).map(|_| rng.random_range(-0.1..0.1)).collect();
        Self::new(rank, channels, down, up, alpha)
    }
}

/// Modulates a projection by control tokens: Q' = Q + alpha * W_u (W_d x_l),
/// applied per token over the channel dimension. `alpha = 0` returns `q`
/// unchanged.
pub fn lora_modulate(q: &TokenGrid, x_l: &TokenGrid, w: &LoraWeights) -> Result<TokenGrid> {
    if !q.same_shape(x_l) {
        return Err(Error::domain("query and control token shapes differ".to_string()));
    }
    if q.c != w.channels {
        return Err(Error::domain(format!(
            "token channels {} != modulation channels {}",
            q.c, w.channels
        )));
    }
    if w.alpha == 0.0 {
        return Ok(q.clone());
    }
    let tokens = q.t * q.h * q.w;
    let c = q.c;
    let mut values = q.values.clone();
    let mut hidden = vec![0.0; w.rank];
    for tok in 0..tokens {
        let base = tok * c;
        let x = &x_l.values[base..base + c];
        for r in 0..w.rank {
            let mut acc = 0.0;
            for k in 0..c {
                acc += w.down[r * c + k] * x[k];
            }
            hidden[r] = acc;
        }
        for ch in 0..c {
            let mut acc = 0.0;
            for r in 0..w.rank {
                acc += w.up[ch * w.rank + r] * hidden[r];
            }
            values[base + ch] += w.alpha * acc;
        }
    }
    TokenGrid::new(q.t, q.h, q.w, q.c, values)
}

// ---------------------------------------------------------------------------
// Weights file
// ---------------------------------------------------------------------------

/// Bundle of adapter and modulation weights, loadable from JSON:
/// `{"adapter": {kernel_dims, strides, weights, bias}, "lora": {rank, down, up, alpha}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningWeights {
    pub adapter: ConvAdapter,
    pub lora: LoraWeights,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    adapter: AdapterFile,
    lora: LoraFile,
}

#[derive(Serialize, Deserialize)]
struct AdapterFile {
    /// [kt, kh, kw, in_channels, out_channels]
    kernel_dims: [usize; 5],
    strides: [usize; 3],
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LoraFile {
    rank: usize,
    down: Vec<f64>,
    up: Vec<f64>,
    alpha: f64,
}

impl ConditioningWeights {
    /// Default seeded configuration: 3x3x3 kernel with 2x temporal / 4x
    /// spatial stride into 16 channels, rank-4 modulation.
    pub fn seeded_default(seed: u64) -> Result<Self> {
        Ok(Self {
            adapter: ConvAdapter::seeded([3, 3, 3], 6, 16, [2, 4, 4], seed)?,
            lora: LoraWeights::seeded(4, 16, 1.0, seed.wrapping_add(1))?,
        })
    }

    pub fn to_json(&self) -> String {
        let file = WeightsFile {
            adapter: AdapterFile {
                kernel_dims: [
                    self.adapter.kernel_dims[0],
                    self.adapter.kernel_dims[1],
                    self.adapter.kernel_dims[2],
                    self.adapter.in_channels,
                    self.adapter.out_channels,
                ],
                strides: self.adapter.strides,
                weights: self.adapter.weights.clone(),
                bias: self.adapter.bias.clone(),
            },
            lora: LoraFile {
                rank: self.lora.rank,
                down: self.lora.down.clone(),
                up: self.lora.up.clone(),
                alpha: self.lora.alpha,
            },
        };
        serde_json::to_string_pretty(&file).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightsFile = serde_json::from_str(text)?;
        let [kt, kh, kw, cin, cout] = file.adapter.kernel_dims;
        let adapter = ConvAdapter::new(
            [kt, kh, kw],
            cin,
            cout,
            file.adapter.strides,
            file.adapter.weights,
            file.adapter.bias,
        )?;
        let channels = file.lora.down.len().checked_div(file.lora.rank).unwrap_or(0);
        let lora =
            LoraWeights::new(file.lora.rank, channels, file.lora.down, file.lora.up, file.lora.alpha)?;
        Ok(Self { adapter, lora })
    }
}
