//! In-memory EEG recordings, seizure annotations and the per-patient global
//! timeline that stitches several recordings together.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Multichannel EEG in physical units (µV), stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    sampling_rate: f64,
    channel_labels: Vec<String>,
    samples_per_channel: usize,
    data: Vec<f32>,
}

impl Recording {
    pub fn new(sampling_rate: f64, channel_labels: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if !(sampling_rate > 0.0) || !sampling_rate.is_finite() {
            return Err(invalid!("sampling rate must be positive, got {}", sampling_rate));
        }
        let channels = channel_labels.len();
        if channels == 0 {
            return Err(invalid!("a recording needs at least one channel"));
        }
        if data.len() % channels != 0 {
            return Err(invalid!("{} samples do not split evenly over {} channels", data.len(), channels));
        }
        Ok(Self { sampling_rate, samples_per_channel: data.len() / channels, channel_labels, data })
    }

    /// Builds a recording from one sample vector per channel.
    pub fn from_channels(sampling_rate: f64, channel_labels: Vec<String>, channels: Vec<Vec<f32>>) -> Result<Self> {
        if channels.len() != channel_labels.len() {
            return Err(invalid!("{} labels for {} channels", channel_labels.len(), channels.len()));
        }
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(invalid!("channels have different lengths"));
        }
        Self::new(sampling_rate, channel_labels, channels.concat())
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn samples_per_channel(&self) -> usize {
        self.samples_per_channel
    }

    pub fn duration_s(&self) -> f64 {
        self.samples_per_channel as f64 / self.sampling_rate
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.samples_per_channel..(c + 1) * self.samples_per_channel]
    }

    /// All samples, channel-major.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Copies samples `start..start+len` of every channel, channel-major.
    pub fn slice(&self, start: usize, len: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(len * self.channels());
        for c in 0..self.channels() {
            out.extend_from_slice(&self.channel(c)[start..start + len]);
        }
        out
    }
}

/// Seizure onset and offset in seconds on some timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeizureAnnotation {
    pub onset_s: f64,
    pub offset_s: f64,
}

impl SeizureAnnotation {
    pub fn new(onset_s: f64, offset_s: f64) -> Result<Self> {
        if !(onset_s >= 0.0) || !(offset_s > onset_s) {
            return Err(invalid!("seizure end {} must follow start {} (start >= 0)", offset_s, onset_s));
        }
        Ok(Self { onset_s, offset_s })
    }
}

/// Checks that annotations are sorted by onset, non-overlapping and, when a
/// duration is given, inside `[0, duration_s]`.
pub fn validate_annotations(annotations: &[SeizureAnnotation], duration_s: Option<f64>) -> Result<()> {
    for (i, a) in annotations.iter().enumerate() {
        if !(a.onset_s >= 0.0) || !(a.offset_s > a.onset_s) {
            return Err(invalid!("seizure {}: end {} must follow start {}", i, a.offset_s, a.onset_s));
        }
        if let Some(d) = duration_s {
            if a.offset_s > d {
                return Err(invalid!("seizure {} ends at {} s, after the timeline end {} s", i, a.offset_s, d));
            }
        }
        if i > 0 && a.onset_s < annotations[i - 1].offset_s {
            return Err(invalid!("seizure {} starts before seizure {} ends (unsorted or overlapping)", i, i - 1));
        }
    }
    Ok(())
}

/// One recording placed on the global timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedRecording {
    pub start_s: f64,
    pub recording: Recording,
}

impl PlacedRecording {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.recording.duration_s()
    }
}

/// A patient's recordings stitched onto one global timeline, with seizure
/// annotations in global seconds. Time not covered by any recording is a gap
/// and never contributes data.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientTimeline {
    pieces: Vec<PlacedRecording>,
    annotations: Vec<SeizureAnnotation>,
}

impl PatientTimeline {
    pub fn new(pieces: Vec<PlacedRecording>, annotations: Vec<SeizureAnnotation>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| invalid!("a timeline needs at least one recording"))?;
        let (rate, channels) = (first.recording.sampling_rate(), first.recording.channels());
        for (i, p) in pieces.iter().enumerate() {
            if !(p.start_s >= 0.0) {
                return Err(invalid!("recording {} starts at negative time {}", i, p.start_s));
            }
            if p.recording.sampling_rate() != rate || p.recording.channels() != channels {
                return Err(invalid!("recording {} differs in sampling rate or channel count", i));
            }
            if i > 0 && p.start_s < pieces[i - 1].end_s() - 1e-9 {
                return Err(invalid!("recording {} overlaps its predecessor or is out of order", i));
            }
        }
        let duration = pieces.last().map_or(0.0, PlacedRecording::end_s);
        validate_annotations(&annotations, Some(duration))?;
        Ok(Self { pieces, annotations })
    }

    /// A single recording starting at time zero.
    pub fn single(recording: Recording, annotations: Vec<SeizureAnnotation>) -> Result<Self> {
        Self::new(alloc::vec![PlacedRecording { start_s: 0.0, recording }], annotations)
    }

    pub fn pieces(&self) -> &[PlacedRecording] {
        &self.pieces
    }

    pub fn annotations(&self) -> &[SeizureAnnotation] {
        &self.annotations
    }

    pub fn duration_s(&self) -> f64 {
        self.pieces.last().map_or(0.0, PlacedRecording::end_s)
    }

    pub fn sampling_rate(&self) -> f64 {
        self.pieces[0].recording.sampling_rate()
    }

    pub fn channels(&self) -> usize {
        self.pieces[0].recording.channels()
    }

    /// Covered intervals `[start, end)`, one per recording.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        self.pieces.iter().map(|p| (p.start_s, p.end_s())).collect()
    }
}
