//! Dataset manifest: one patient's recordings placed on a global timeline,
//! plus seizure annotations on that timeline. Stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use preictal_core::recording::{PatientTimeline, PlacedRecording, Recording, SeizureAnnotation};

use crate::error::{self, Error, Result};
use crate::{edf, raw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Edf,
    Eegr,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("edf") => Ok(Format::Edf),
            Some("eegr") => Ok(Format::Eegr),
            _ => Err(Error::Unsupported(format!("{} (expected .edf or .eegr)", path.display()))),
        }
    }
}

pub fn load_recording(path: &Path, format: Format) -> Result<Recording> {
    let bytes = error::read(path)?;
    match format {
        Format::Edf => edf::parse_edf(&bytes),
        Format::Eegr => raw::read_raw(&bytes),
    }
    .map_err(|e| e.in_file(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub format: Format,
    pub start_s: f64,
    /// Labels assigned on load, for formats that do not store them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub onset_s: f64,
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub patient_id: String,
    /// Channel labels to keep, in this order; all channels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<String>>,
    pub recordings: Vec<RecordingEntry>,
    #[serde(default)]
    pub annotations: Vec<AnnotationEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(error::read(path)?)
            .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Format(e.to_string()).in_file(path))?;
        m.validate().map_err(|e| e.in_file(path))?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.recordings.is_empty() {
            return Err(Error::Config("manifest lists no recordings".into()));
        }
        if let Some(w) = self.recordings.windows(2).find(|w| !(w[0].start_s < w[1].start_s)) {
            return Err(Error::Config(format!(
                "recordings must be sorted by start: {} ({} s) then {} ({} s)",
                w[0].path.display(),
                w[0].start_s,
                w[1].path.display(),
                w[1].start_s
            )));
        }
        self.seizures().map(|_| ())
    }

    pub fn seizures(&self) -> Result<Vec<SeizureAnnotation>> {
        Ok(self.annotations.iter().map(|a| SeizureAnnotation::new(a.onset_s, a.offset_s)).collect::<Result<_, _>>()?)
    }

    /// Loads every recording and stitches the patient timeline. Gaps between
    /// recordings stay gaps; overlapping recordings are an error.
    pub fn timeline(&self, base_dir: &Path) -> Result<PatientTimeline> {
        let mut pieces = Vec::with_capacity(self.recordings.len());
        for entry in &self.recordings {
            let path = base_dir.join(&entry.path);
            let mut rec = load_recording(&path, entry.format)?;
            if let Some(labels) = &entry.channel_labels {
                rec = relabel(rec, labels).map_err(|e| e.in_file(&path))?;
            }
            let rec = match &self.channels {
                Some(keep) => select_channels(&rec, keep).map_err(|e| e.in_file(&path))?,
                None => rec,
            };
            pieces.push(PlacedRecording { start_s: entry.start_s, recording: rec });
        }
        Ok(PatientTimeline::new(pieces, self.seizures()?)?)
    }
}

pub fn relabel(rec: Recording, labels: &[String]) -> Result<Recording> {
    if labels.len() != rec.channels() {
        return Err(Error::Format(format!("{} labels for {} channels", labels.len(), rec.channels())));
    }
    Ok(Recording::new(rec.sampling_rate(), labels.to_vec(), rec.data().to_vec())?)
}

pub fn select_channels(rec: &Recording, keep: &[String]) -> Result<Recording> {
    let channels = keep
        .iter()
        .map(|label| {
            rec.channel_labels()
                .iter()
                .position(|l| l == label)
                .map(|i| rec.channel(i).to_vec())
                .ok_or_else(|| Error::Format(format!("channel '{label}' not present (have {:?})", rec.channel_labels())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Recording::from_channels(rec.sampling_rate(), keep.to_vec(), channels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let m = Manifest {
            patient_id: "p1".into(),
            channels: None,
            recordings: vec![RecordingEntry { path: "a.eegr".into(), format: Format::Eegr, start_s: 0.0, channel_labels: None }],
            annotations: vec![AnnotationEntry { onset_s: 10.0, offset_s: 20.0 }],
        };
        let back: Manifest = toml::from_str(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn unsorted_recordings_are_rejected() {
        let entry = |s: f64| RecordingEntry { path: "a.eegr".into(), format: Format::Eegr, start_s: s, channel_labels: None };
        let m = Manifest { patient_id: "p".into(), channels: None, recordings: vec![entry(5.0), entry(0.0)], annotations: vec![] };
        assert!(m.validate().is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(Format::from_path(Path::new("x/chb01_01.EDF")).unwrap(), Format::Edf);
        assert!(matches!(Format::from_path(Path::new("x.mat")), Err(Error::Unsupported(_))));
    }
}
