//! Window transforms applied before model input: STFT magnitude, log
//! compression, bilinear resizing, per-channel standardization and
//! anti-aliased decimation.

mod fft;

pub use fft::Fft;

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{invalid, Error, Result};

pub const SEGMENT_LEN: usize = 128;
pub const HOP: usize = 64;
pub const STD_FLOOR: f64 = 1e-8;

/// Magnitude spectrogram, `C × F × T` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<f32>,
    pub channels: usize,
    pub f_bins: Vec<f64>,
    pub t_bins: Vec<f64>,
}

impl Spectrogram {
    pub fn freqs(&self) -> usize {
        self.f_bins.len()
    }

    pub fn frames(&self) -> usize {
        self.t_bins.len()
    }

    /// The `F × T` plane of channel `c`.
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.freqs() * self.frames();
        &self.values[c * n..(c + 1) * n]
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * Float::cos(core::f64::consts::TAU * i as f64 / n as f64)).collect()
}

/// Output dimensions `(F, T)` of [`stft_magnitude`] for `samples` input samples.
pub fn stft_shape(samples: usize, segment_len: usize, hop: usize) -> Option<(usize, usize)> {
    if samples < segment_len || hop == 0 {
        return None;
    }
    Some((segment_len / 2 + 1, (samples - segment_len) / hop + 1))
}

/// Hann-windowed STFT magnitude of each channel of a channel-major window.
pub fn stft_magnitude(
    window: &[f32],
    channels: usize,
    sampling_rate: f64,
    segment_len: usize,
    hop: usize,
) -> Result<Spectrogram> {
    if channels == 0 || window.len() % channels != 0 {
        return Err(invalid!("{} samples do not split over {} channels", window.len(), channels));
    }
    let samples = window.len() / channels;
    let (freqs, frames) =
        stft_shape(samples, segment_len, hop).ok_or(Error::InputTooShort { len: samples, required: segment_len })?;
    let fft = Fft::new(segment_len)?;
    let taper = hann(segment_len);
    let mut values = vec![0f32; channels * freqs * frames];
    let mut seg = vec![0f64; segment_len];
    let mut mag = vec![0f64; freqs];
    for c in 0..channels {
        let x = &window[c * samples..(c + 1) * samples];
        let plane = &mut values[c * freqs * frames..(c + 1) * freqs * frames];
        for t in 0..frames {
            for (i, s) in seg.iter_mut().enumerate() {
                *s = x[t * hop + i] as f64 * taper[i];
            }
            fft.real_magnitude(&seg, &mut mag);
            for (k, m) in mag.iter().enumerate() {
                plane[k * frames + t] = *m as f32;
            }
        }
    }
    Ok(Spectrogram {
        values,
        channels,
        f_bins: (0..freqs).map(|k| k as f64 * sampling_rate / segment_len as f64).collect(),
        t_bins: (0..frames).map(|t| (t * hop) as f64 / sampling_rate + segment_len as f64 / (2.0 * sampling_rate)).collect(),
    })
}

/// `ln(1 + x)` elementwise.
pub fn log_scale(mut spec: Spectrogram) -> Spectrogram {
    spec.values.iter_mut().for_each(|v| *v = Float::ln_1p(*v));
    spec
}

/// Bilinear resize of an `h × w` matrix with half-pixel centers and edge
/// clamping.
pub fn bilinear_resize(m: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Result<Vec<f32>> {
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return Err(invalid!("resize {}x{} -> {}x{}: dimensions must be positive", h, w, out_h, out_w));
    }
    if m.len() != h * w {
        return Err(invalid!("matrix holds {} values, expected {}x{}", m.len(), h, w));
    }
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f32)> {
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = Float::floor(src) as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, (src - lo as f64) as f32)
            })
            .collect()
    };
    let (ys, xs) = (axis(h, out_h), axis(w, out_w));
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = m[y0 * w + x0] + (m[y0 * w + x1] - m[y0 * w + x0]) * fx;
            let bottom = m[y1 * w + x0] + (m[y1 * w + x1] - m[y1 * w + x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    Ok(out)
}

/// Per-channel mean and standard deviation, estimated on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Pools every sample of each channel across `windows` (channel-major).
    pub fn compute<'a>(windows: impl IntoIterator<Item = &'a [f32]>, channels: usize) -> Result<Self> {
        let mut sum = vec![0f64; channels];
        let mut sq = vec![0f64; channels];
        let mut count = 0usize;
        for w in windows {
            if channels == 0 || w.len() % channels != 0 {
                return Err(invalid!("window of {} samples does not split over {} channels", w.len(), channels));
            }
            let n = w.len() / channels;
            for c in 0..channels {
                for &v in &w[c * n..(c + 1) * n] {
                    sum[c] += v as f64;
                    sq[c] += v as f64 * v as f64;
                }
            }
            count += n;
        }
        if count == 0 {
            return Err(Error::EmptyDataset);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| Float::sqrt((s / count as f64 - m * m).max(0.0)).max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    /// `(x − mean) / std` per channel.
    pub fn apply(&self, window: &[f32]) -> Result<Vec<f32>> {
        let channels = self.mean.len();
        if channels == 0 || window.len() % channels != 0 {
            return Err(invalid!("window does not match {} channels", channels));
        }
        let n = window.len() / channels;
        Ok(window
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i / n;
                ((v as f64 - self.mean[c]) / self.std[c]) as f32
            })
            .collect())
    }
}

/// Standardizes each `plane_len`-sized plane to zero mean, unit variance.
pub fn standardize_planes(values: &mut [f32], plane_len: usize) {
    for plane in values.chunks_mut(plane_len.max(1)) {
        let n = plane.len() as f64;
        let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = plane.iter().map(|&v| (v as f64 - mean) * (v as f64 - mean)).sum::<f64>() / n;
        let std = Float::sqrt(var).max(STD_FLOOR);
        plane.iter_mut().for_each(|v| *v = ((*v as f64 - mean) / std) as f32);
    }
}

/// Block-average decimation: a `factor`-tap moving average evaluated every
/// `factor` samples. Output keeps `⌊S / factor⌋` samples per channel.
pub fn downsample(window: &[f32], channels: usize, factor: usize) -> Result<Vec<f32>> {
    if factor == 0 {
        return Err(invalid!("down-sampling factor must be >= 1"));
    }
    if channels == 0 || window.len() % channels != 0 {
        return Err(invalid!("window does not split over {} channels", channels));
    }
    let samples = window.len() / channels;
    if samples < factor {
        return Err(Error::InputTooShort { len: samples, required: factor });
    }
    if factor == 1 {
        return Ok(window.to_vec());
    }
    let out_len = samples / factor;
    let inv = 1.0 / factor as f64;
    let mut out = Vec::with_capacity(channels * out_len);
    for c in 0..channels {
        let x = &window[c * samples..(c + 1) * samples];
        for j in 0..out_len {
            let s: f64 = x[j * factor..(j + 1) * factor].iter().map(|&v| v as f64).sum();
            out.push((s * inv) as f32);
        }
    }
    Ok(out)
}
