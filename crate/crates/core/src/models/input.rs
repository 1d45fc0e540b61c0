//! Window → model-input transforms.

use alloc::vec::Vec;

use num_traits::Float;

use super::{ArchConfig, ArchTag};
use crate::dsp::{self, ChannelStats, HOP, SEGMENT_LEN};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// STFT → `ln(1+x)` → resize to `I×I` → per-channel standardization.
    Image,
    /// The window split into `n` equal sub-windows, each an `Image`.
    SubImages,
    /// Block-average downsampling → standardization with training statistics.
    Sequence,
}

/// Geometry of the transform for one window size.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub kind: InputKind,
    pub channels: usize,
    pub sampling_rate: f64,
    pub window_s: f64,
    pub image_size: usize,
    pub sub_window_s: f64,
    pub sub_image_size: usize,
    pub downsample: usize,
}

impl InputSpec {
    pub fn new(kind: InputKind, channels: usize, sampling_rate: f64, window_s: f64) -> Self {
        Self { kind, channels, sampling_rate, window_s, image_size: 128, sub_window_s: 5.0, sub_image_size: 64, downsample: 4 }
    }

    pub fn window_samples(&self) -> usize {
        Float::round(self.window_s * self.sampling_rate) as usize
    }

    /// `n = ⌊window / sub-window⌋`.
    pub fn sub_windows(&self) -> Result<usize> {
        if !(self.sub_window_s > 0.0) {
            return Err(invalid!("sub-window length must be positive"));
        }
        let n = Float::floor(self.window_s / self.sub_window_s + 1e-9) as usize;
        if n < 1 {
            return Err(invalid!("{} s window holds no {} s sub-window", self.window_s, self.sub_window_s));
        }
        Ok(n)
    }

    pub fn sub_window_samples(&self) -> usize {
        Float::round(self.sub_window_s * self.sampling_rate) as usize
    }

    pub fn sequence_len(&self) -> usize {
        self.window_samples() / self.downsample.max(1)
    }

    /// The architecture geometry this transform feeds.
    pub fn arch_config(&self, tag: ArchTag) -> Result<ArchConfig> {
        if tag.input_kind() != self.kind {
            return Err(invalid!("{} does not take {:?} input", tag, self.kind));
        }
        let mut cfg = ArchConfig::new(tag, self.channels);
        cfg.image_size = self.image_size;
        cfg.sub_image_size = self.sub_image_size;
        cfg.sequence_len = self.sequence_len();
        if self.kind == InputKind::SubImages {
            cfg.sub_windows = self.sub_windows()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sample_len(&self) -> Result<usize> {
        let c = self.channels;
        Ok(match self.kind {
            InputKind::Image => c * self.image_size * self.image_size,
            InputKind::SubImages => self.sub_windows()? * c * self.sub_image_size * self.sub_image_size,
            InputKind::Sequence => c * self.sequence_len(),
        })
    }
}

/// A fitted transform. Sequence inputs carry channel statistics estimated
/// on the training windows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub spec: InputSpec,
    pub stats: Option<ChannelStats>,
}

fn image(window: &[f32], channels: usize, rate: f64, side: usize) -> Result<Vec<f32>> {
    let spec = dsp::log_scale(dsp::stft_magnitude(window, channels, rate, SEGMENT_LEN, HOP)?);
    let (f, t) = (spec.freqs(), spec.frames());
    let mut out = Vec::with_capacity(channels * side * side);
    for c in 0..channels {
        out.extend(dsp::bilinear_resize(spec.plane(c), f, t, side, side)?);
    }
    dsp::standardize_planes(&mut out, side * side);
    Ok(out)
}

impl Preprocessor {
    pub fn fit<'a>(spec: InputSpec, train: impl IntoIterator<Item = &'a [f32]>) -> Result<Self> {
        if spec.channels == 0 {
            return Err(invalid!("input needs at least one channel"));
        }
        let stats = match spec.kind {
            InputKind::Sequence => {
                let reduced =
                    train.into_iter().map(|w| dsp::downsample(w, spec.channels, spec.downsample)).collect::<Result<Vec<_>>>()?;
                Some(ChannelStats::compute(reduced.iter().map(|v| v.as_slice()), spec.channels)?)
            }
            _ => None,
        };
        Ok(Self { spec, stats })
    }

    /// One window (channel-major, `C × S`) to one flattened model sample.
    pub fn transform(&self, window: &[f32]) -> Result<Vec<f32>> {
        let sp = &self.spec;
        let c = sp.channels;
        let expected = c * sp.window_samples();
        if window.len() != expected {
            return Err(invalid!("window has {} values, expected {}", window.len(), expected));
        }
        match sp.kind {
            InputKind::Image => image(window, c, sp.sampling_rate, sp.image_size),
            InputKind::SubImages => {
                let n = sp.sub_windows()?;
                let len = sp.sub_window_samples();
                let samples = sp.window_samples();
                if n * len > samples {
                    return Err(Error::InputTooShort { len: samples, required: n * len });
                }
                let mut out = Vec::with_capacity(n * c * sp.sub_image_size * sp.sub_image_size);
                let mut part = Vec::with_capacity(c * len);
                for k in 0..n {
                    part.clear();
                    for ch in 0..c {
                        let row = &window[ch * samples..(ch + 1) * samples];
                        part.extend_from_slice(&row[k * len..(k + 1) * len]);
                    }
                    out.extend(image(&part, c, sp.sampling_rate, sp.sub_image_size)?);
                }
                Ok(out)
            }
            InputKind::Sequence => {
                let stats = self.stats.as_ref().ok_or_else(|| invalid!("sequence input used before fitting"))?;
                stats.apply(&dsp::downsample(window, c, sp.downsample)?)
            }
        }
    }

    /// Stacks transformed samples into a batch tensor of `arch`'s input shape.
    pub fn batch<S: Scalar>(samples: &[&[f32]], sample_shape: &[usize]) -> Result<Tensor<S>> {
        let per: usize = sample_shape.iter().product();
        let mut data = Vec::with_capacity(per * samples.len());
        for s in samples {
            if s.len() != per {
                return Err(invalid!("sample of {} values does not match shape {:?}", s.len(), sample_shape));
            }
            data.extend(s.iter().map(|&v| S::of(v as f64)));
        }
        let mut shape = alloc::vec![samples.len()];
        shape.extend_from_slice(sample_shape);
        Tensor::new(&shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(channels: usize, samples: usize) -> Vec<f32> {
        (0..channels * samples).map(|i| ((i as f32) * 0.37).sin() * (1 + i / samples) as f32).collect()
    }

    #[test]
    fn image_geometry() {
        let mut spec = InputSpec::new(InputKind::Image, 2, 64.0, 10.0);
        spec.image_size = 16;
        let p = Preprocessor::fit(spec, core::iter::empty()).unwrap();
        let out = p.transform(&window(2, 640)).unwrap();
        assert_eq!(out.len(), 2 * 16 * 16);
        for plane in out.chunks(256) {
            let mean: f32 = plane.iter().sum::<f32>() / 256.0;
            assert!(mean.abs() < 1e-4);
        }
    }

    #[test]
    fn sub_window_count() {
        let spec = InputSpec::new(InputKind::SubImages, 1, 256.0, 30.0);
        assert_eq!(spec.sub_windows().unwrap(), 6);
        assert_eq!(InputSpec::new(InputKind::SubImages, 1, 256.0, 5.0).sub_windows().unwrap(), 1);
        assert!(InputSpec::new(InputKind::SubImages, 1, 256.0, 4.0).sub_windows().is_err());
        let mut small = InputSpec::new(InputKind::SubImages, 1, 64.0, 10.0);
        small.sub_image_size = 8;
        let p = Preprocessor::fit(small.clone(), core::iter::empty()).unwrap();
        assert_eq!(p.transform(&window(1, 640)).unwrap().len(), small.sample_len().unwrap());
        let cfg = small.arch_config(ArchTag::CnnLstm).unwrap();
        assert_eq!(cfg.sub_windows, 2);
        assert!(small.arch_config(ArchTag::Tcn).is_err());
    }

    #[test]
    fn sequence_uses_training_statistics() {
        let spec = InputSpec::new(InputKind::Sequence, 1, 8.0, 1.0);
        let train = [vec![1.0f32; 8], vec![3.0f32; 8]];
        let p = Preprocessor::fit(spec.clone(), train.iter().map(|w| w.as_slice())).unwrap();
        let stats = p.stats.as_ref().unwrap();
        assert_eq!(stats.mean, [2.0]);
        assert_eq!(stats.std, [1.0]);
        assert_eq!(p.transform(&[5.0; 8]).unwrap(), [3.0, 3.0]);
        assert_eq!(spec.arch_config(ArchTag::Tcn).unwrap().sequence_len, 2);
        assert!(p.transform(&[0.0; 7]).is_err());
    }

    #[test]
    fn batches_take_the_sample_shape() {
        let a = [1.0f32, 2.0];
        let b = [3.0f32, 4.0];
        let t: Tensor<f64> = Preprocessor::batch(&[&a, &b], &[1, 2]).unwrap();
        assert_eq!(t.shape(), &[2, 1, 2]);
        assert!(Preprocessor::batch::<f64>(&[&a], &[3]).is_err());
    }
}
