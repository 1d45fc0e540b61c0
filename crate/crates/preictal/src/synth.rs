//! `synth`: a synthetic patient on disk (one `.eegr` recording, its
//! manifest, and the effective spec).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use preictal_core::synth::{synthesize_recording, Signature, SynthSpec};

use crate::error::{self, Error, Result};
use crate::manifest::{AnnotationEntry, Format, Manifest, RecordingEntry};
use crate::raw::write_raw;

pub const RECORDING: &str = "patient.eegr";
pub const SPEC_COPY: &str = "synth.toml";

/// Evenly spaced seizures; an alternative to listing them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub first_onset_s: f64,
    pub spacing_s: f64,
    pub count: usize,
    pub seizure_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureFile {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub amplitude: f64,
    pub preictal_s: f64,
}

/// Synthetic dataset spec file (TOML). Absent fields take the defaults of
/// [`SynthSpec::default`]; `duration_s` defaults to 30 min past the last
/// seizure when the seizures are given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthFile {
    pub patient_id: Option<String>,
    pub duration_s: Option<f64>,
    pub channels: Option<usize>,
    pub sampling_rate: Option<f64>,
    /// `[onset_s, length_s]` pairs.
    pub seizures: Option<Vec<[f64; 2]>>,
    pub schedule: Option<Schedule>,
    pub signature: Option<SignatureFile>,
    pub white_std: Option<f64>,
    pub pink_std: Option<f64>,
    pub ictal_amplitude: Option<f64>,
    pub seed: Option<u64>,
}

impl SynthFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn spec(&self) -> Result<SynthSpec> {
        let d = SynthSpec::default();
        let seizures = match (&self.seizures, &self.schedule) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `seizures` or `schedule`, not both".into())),
            (Some(list), None) => Some(list.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>()),
            (None, Some(s)) => Some(SynthSpec::evenly_spaced(s.first_onset_s, s.spacing_s, s.count, s.seizure_s)),
            (None, None) => None,
        };
        let duration_s = match (self.duration_s, &seizures) {
            (Some(v), _) => v,
            (None, Some(list)) => list.iter().map(|(on, len)| on + len).fold(0.0, f64::max) + 1800.0,
            (None, None) => d.duration_s,
        };
        let signature = self
            .signature
            .map(|s| Signature { band_lo_hz: s.band_lo_hz, band_hi_hz: s.band_hi_hz, amplitude: s.amplitude, preictal_s: s.preictal_s })
            .unwrap_or(d.signature);
        let spec = SynthSpec {
            duration_s,
            channels: self.channels.unwrap_or(d.channels),
            sampling_rate: self.sampling_rate.unwrap_or(d.sampling_rate),
            seizures: seizures.unwrap_or(d.seizures),
            signature,
            white_std: self.white_std.unwrap_or(d.white_std),
            pink_std: self.pink_std.unwrap_or(d.pink_std),
            ictal_amplitude: self.ictal_amplitude.unwrap_or(d.ictal_amplitude),
            seed: self.seed.unwrap_or(d.seed),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fully explicit file describing `spec`.
    pub fn from_spec(spec: &SynthSpec, patient_id: &str) -> Self {
        let s = spec.signature;
        Self {
            patient_id: Some(patient_id.into()),
            duration_s: Some(spec.duration_s),
            channels: Some(spec.channels),
            sampling_rate: Some(spec.sampling_rate),
            seizures: Some(spec.seizures.iter().map(|&(a, b)| [a, b]).collect()),
            schedule: None,
            signature: Some(SignatureFile { band_lo_hz: s.band_lo_hz, band_hi_hz: s.band_hi_hz, amplitude: s.amplitude, preictal_s: s.preictal_s }),
            white_std: Some(spec.white_std),
            pink_std: Some(spec.pink_std),
            ictal_amplitude: Some(spec.ictal_amplitude),
            seed: Some(spec.seed),
        }
    }
}

pub struct Synthesized {
    pub spec: SynthSpec,
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

/// Writes the synthetic patient into `out_dir`. `seed` replaces the spec's.
pub fn cmd_synth(spec_file: Option<&Path>, seed: Option<u64>, out_dir: &Path) -> Result<Synthesized> {
    let file = match spec_file {
        Some(p) => {
            let text = String::from_utf8(error::read(p)?).map_err(|_| Error::Config(format!("{} is not UTF-8", p.display())))?;
            SynthFile::parse(&text).map_err(|e| e.in_file(p))?
        }
        None => SynthFile::default(),
    };
    let mut spec = file.spec().map_err(|e| match spec_file {
        Some(p) => e.in_file(p),
        None => e,
    })?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    write_patient(&spec, file.patient_id.as_deref().unwrap_or("synth"), out_dir)
}

pub fn write_patient(spec: &SynthSpec, patient_id: &str, out_dir: &Path) -> Result<Synthesized> {
    let (rec, annotations) = synthesize_recording(spec)?;
    error::write(&out_dir.join(RECORDING), write_raw(&rec)?)?;
    let manifest = Manifest {
        patient_id: patient_id.into(),
        channels: None,
        recordings: vec![RecordingEntry { path: RECORDING.into(), format: Format::Eegr, start_s: 0.0, channel_labels: None }],
        annotations: annotations.iter().map(|a| AnnotationEntry { onset_s: a.onset_s, offset_s: a.offset_s }).collect(),
    };
    let manifest_path = out_dir.join(crate::convert::MANIFEST);
    error::write(&manifest_path, manifest.to_toml())?;
    let copy = toml::to_string(&SynthFile::from_spec(spec, patient_id)).expect("spec serializes");
    error::write(&out_dir.join(SPEC_COPY), copy)?;
    Ok(Synthesized { spec: spec.clone(), manifest, manifest_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_file_is_the_default_spec() {
        assert_eq!(SynthFile::default().spec().unwrap(), SynthSpec::default());
    }

    #[test]
    fn schedule_and_explicit_list_agree() {
        let a = SynthFile::parse("[schedule]\nfirst_onset_s = 600.0\nspacing_s = 1200.0\ncount = 3\nseizure_s = 30.0").unwrap();
        let b = SynthFile::parse("seizures = [[600.0, 30.0], [1800.0, 30.0], [3000.0, 30.0]]").unwrap();
        let (sa, sb) = (a.spec().unwrap(), b.spec().unwrap());
        assert_eq!(sa, sb);
        assert_eq!(sa.duration_s, 3030.0 + 1800.0);
        let both = SynthFile { seizures: b.seizures.clone(), ..a };
        assert!(both.spec().is_err());
    }

    #[test]
    fn explicit_file_round_trips() {
        let spec = SynthSpec { seed: 9, ..SynthSpec::default() };
        let text = toml::to_string(&SynthFile::from_spec(&spec, "x")).unwrap();
        assert_eq!(SynthFile::parse(&text).unwrap().spec().unwrap(), spec);
    }
}
