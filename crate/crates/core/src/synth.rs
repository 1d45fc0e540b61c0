//! Seeded synthetic EEG for desk-scale experiments: pink-plus-white noise
//! baseline, a band-limited signature before each scheduled seizure, and a
//! high-amplitude rhythmic discharge during the seizure itself.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::recording::{Recording, SeizureAnnotation};
use crate::rng::{gaussian, rng_for};

/// Sinusoidal band injected during each preictal span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signature {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    /// Amplitude (µV) of a single sinusoid with the same total power as the
    /// injected band.
    pub amplitude: f64,
    /// Length of the span before each onset that carries the signature.
    pub preictal_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub channels: usize,
    pub sampling_rate: f64,
    /// `(onset_s, seizure length s)` pairs.
    pub seizures: Vec<(f64, f64)>,
    pub signature: Signature,
    pub white_std: f64,
    pub pink_std: f64,
    /// Amplitude of the 3 Hz ictal discharge; zero disables it.
    pub ictal_amplitude: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Four channels at 256 Hz, four seizures two hours apart, each preceded
    /// by an hour of 18-22 Hz activity.
    fn default() -> Self {
        let seizures = Self::evenly_spaced(5400.0, 7200.0, 4, 60.0);
        Self {
            duration_s: 5400.0 + 3.0 * 7200.0 + 1800.0,
            channels: 4,
            sampling_rate: 256.0,
            seizures,
            signature: Signature { band_lo_hz: 18.0, band_hi_hz: 22.0, amplitude: 6.0, preictal_s: 3600.0 },
            white_std: 4.0,
            pink_std: 8.0,
            ictal_amplitude: 60.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// `count` seizures of `seizure_s` seconds, the first at `first_onset_s`
    /// and the rest every `spacing_s` seconds (onset to onset).
    pub fn evenly_spaced(first_onset_s: f64, spacing_s: f64, count: usize, seizure_s: f64) -> Vec<(f64, f64)> {
        (0..count).map(|i| (first_onset_s + i as f64 * spacing_s, seizure_s)).collect()
    }

    pub fn annotations(&self) -> Result<Vec<SeizureAnnotation>> {
        self.seizures.iter().map(|&(on, len)| SeizureAnnotation::new(on, on + len)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.sampling_rate > 0.0) || self.channels == 0 {
            return Err(invalid!("duration, sampling rate and channel count must be positive"));
        }
        let sig = &self.signature;
        if !(sig.band_lo_hz >= 0.0) || !(sig.band_hi_hz >= sig.band_lo_hz) || sig.band_hi_hz >= self.sampling_rate / 2.0 {
            return Err(invalid!(
                "signature band {}-{} Hz must lie below Nyquist {} Hz",
                sig.band_lo_hz,
                sig.band_hi_hz,
                self.sampling_rate / 2.0
            ));
        }
        if !(sig.amplitude >= 0.0) || !(sig.preictal_s >= 0.0) || !(self.white_std >= 0.0) || !(self.pink_std >= 0.0) {
            return Err(invalid!("amplitudes and lengths must be non-negative"));
        }
        let mut prev_end = f64::NEG_INFINITY;
        for (i, &(on, len)) in self.seizures.iter().enumerate() {
            if !(len > 0.0) || on < 0.0 || on + len > self.duration_s {
                return Err(invalid!("seizure {} at {} s (+{} s) exceeds the {} s recording", i, on, len, self.duration_s));
            }
            if on < prev_end {
                return Err(invalid!("seizure {} overlaps or precedes seizure {}", i, i.saturating_sub(1)));
            }
            prev_end = on + len;
        }
        Ok(())
    }
}

/// Paul Kellet's economy 1/f filter applied to white noise.
struct Pink {
    b: [f64; 3],
}

impl Pink {
    fn next(&mut self, white: f64) -> f64 {
        self.b[0] = 0.99765 * self.b[0] + white * 0.0990460;
        self.b[1] = 0.96300 * self.b[1] + white * 0.2965164;
        self.b[2] = 0.57000 * self.b[2] + white * 1.0526913;
        // Gain of the filter on unit white noise is roughly 3.3.
        (self.b[0] + self.b[1] + self.b[2] + white * 0.1848) / 3.3
    }
}

/// Generates the recording and its seizure annotations. Identical specs give
/// bit-identical output; the signature uses its own random stream, so the
/// baseline noise does not depend on the signature amplitude.
pub fn synthesize_recording(spec: &SynthSpec) -> Result<(Recording, Vec<SeizureAnnotation>)> {
    spec.validate()?;
    let annotations = spec.annotations()?;
    let f = spec.sampling_rate;
    let n = Float::round(spec.duration_s * f) as usize;
    let sig = spec.signature;
    let components: Vec<f64> = {
        let k = Float::floor(sig.band_hi_hz - sig.band_lo_hz) as usize + 1;
        if k == 1 {
            alloc::vec![(sig.band_lo_hz + sig.band_hi_hz) / 2.0]
        } else {
            (0..k).map(|i| sig.band_lo_hz + (sig.band_hi_hz - sig.band_lo_hz) * i as f64 / (k - 1) as f64).collect()
        }
    };
    let comp_amp = sig.amplitude / Float::sqrt(components.len() as f64);

    let mut channels = Vec::with_capacity(spec.channels);
    for c in 0..spec.channels {
        let mut noise_rng = rng_for(spec.seed, &[0, c as u64]);
        let mut pink = Pink { b: [0.0; 3] };
        let mut x: Vec<f32> = (0..n)
            .map(|_| {
                let w = gaussian(&mut noise_rng);
                let p = pink.next(gaussian(&mut noise_rng));
                (spec.white_std * w + spec.pink_std * p) as f32
            })
            .collect();

        let mut sig_rng = rng_for(spec.seed, &[1, c as u64]);
        for a in &annotations {
            let phases: Vec<f64> = components.iter().map(|_| sig_rng.gen::<f64>() * core::f64::consts::TAU).collect();
            let start = Float::ceil(((a.onset_s - sig.preictal_s).max(0.0)) * f) as usize;
            let end = (Float::ceil(a.onset_s * f) as usize).min(n);
            if comp_amp > 0.0 {
                for (i, v) in x.iter_mut().enumerate().take(end).skip(start) {
                    let t = i as f64 / f;
                    let s: f64 = components
                        .iter()
                        .zip(&phases)
                        .map(|(&hz, &ph)| Float::sin(core::f64::consts::TAU * hz * t + ph))
                        .sum();
                    *v += (comp_amp * s) as f32;
                }
            }
            if spec.ictal_amplitude > 0.0 {
                let on = Float::ceil(a.onset_s * f) as usize;
                let off = (Float::ceil(a.offset_s * f) as usize).min(n);
                for (i, v) in x.iter_mut().enumerate().take(off).skip(on) {
                    let t = i as f64 / f;
                    *v += (spec.ictal_amplitude * Float::sin(core::f64::consts::TAU * 3.0 * t)) as f32;
                }
            }
        }
        channels.push(x);
    }
    let labels = (0..spec.channels).map(|c| format!("EEG{}", c + 1)).collect();
    Ok((Recording::from_channels(f, labels, channels)?, annotations))
}
