//! `convert`: EDF or `.eegr` input (one file or a directory) to `.eegr`
//! files plus a manifest stub.

use std::path::{Path, PathBuf};

use crate::chbmit::{parse_summary, timeline_offsets};
use crate::edf::{parse_edf, parse_header};
use crate::error::{self, Error, Result};
use crate::manifest::{AnnotationEntry, Format, Manifest, RecordingEntry};
use crate::raw::{read_raw, write_raw};

pub const MANIFEST: &str = "manifest.toml";

pub struct Converted {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub outputs: Vec<PathBuf>,
}

struct Input {
    path: PathBuf,
    out_name: String,
    duration_s: f64,
    /// EDF start time, seconds since 1985-01-01.
    header_start_s: Option<f64>,
    labels: Option<Vec<String>>,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "recording".into())
}

fn same_file(a: &Path, b: &Path) -> bool {
    matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y)
}

fn convert_one(path: &Path, out_dir: &Path) -> Result<Input> {
    let format = Format::from_path(path)?;
    let bytes = error::read(path)?;
    let (rec, header_start_s, labels) = match format {
        Format::Edf => {
            let header = parse_header(&bytes).map_err(|e| e.in_file(path))?;
            let rec = parse_edf(&bytes).map_err(|e| e.in_file(path))?;
            let labels = rec.channel_labels().to_vec();
            (rec, header.start_seconds().ok(), Some(labels))
        }
        Format::Eegr => (read_raw(&bytes).map_err(|e| e.in_file(path))?, None, None),
    };
    let out_name = format!("{}.eegr", stem(path));
    let target = out_dir.join(&out_name);
    if same_file(path, &target) {
        return Err(Error::Config(format!("{} would overwrite its input", target.display())));
    }
    error::write(&target, write_raw(&rec)?)?;
    Ok(Input { path: path.to_path_buf(), out_name, duration_s: rec.duration_s(), header_start_s, labels })
}

/// Converts `input` into `out_dir`. A directory is converted file by file in
/// name order; a CHB-MIT `*-summary.txt` next to the files supplies start
/// offsets and seizure annotations. Without one, EDF header start times place
/// the files, or they are laid end to end when any file lacks a header time.
pub fn cmd_convert(input: &Path, out_dir: &Path) -> Result<Converted> {
    let (patient_id, files, summary) = if input.is_dir() {
        let mut data = Vec::new();
        let mut summary = None;
        let entries = std::fs::read_dir(input).map_err(|e| Error::io(input, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(input, e))?.path();
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if name.ends_with("-summary.txt") {
                summary = Some(path);
            } else if Format::from_path(&path).is_ok() {
                data.push(path);
            }
        }
        if data.is_empty() {
            return Err(Error::Unsupported(format!("{} contains no .edf or .eegr files", input.display())));
        }
        data.sort();
        let id = input.canonicalize().ok().as_deref().map(stem).unwrap_or_else(|| stem(input));
        (id, data, summary)
    } else {
        Format::from_path(input)?;
        (stem(input), vec![input.to_path_buf()], None)
    };

    let inputs: Vec<Input> = files.iter().map(|f| convert_one(f, out_dir)).collect::<Result<_>>()?;
    let mut annotations = Vec::new();
    let starts: Vec<f64> = if let Some(summary_path) = &summary {
        let text = String::from_utf8(error::read(summary_path)?)
            .map_err(|_| Error::Format("summary is not UTF-8".into()).in_file(summary_path))?;
        let blocks = parse_summary(&text).map_err(|e| e.in_file(summary_path))?;
        let offsets = timeline_offsets(&blocks).map_err(|e| e.in_file(summary_path))?;
        let mut starts = Vec::with_capacity(inputs.len());
        for inp in &inputs {
            let name = inp.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let i = blocks
                .iter()
                .position(|b| b.name == name)
                .ok_or_else(|| Error::Format(format!("{name} is not listed in the summary")).in_file(summary_path))?;
            starts.push(offsets[i]);
            for s in &blocks[i].seizures {
                annotations.push(AnnotationEntry { onset_s: offsets[i] + s.onset_s, offset_s: offsets[i] + s.offset_s });
            }
        }
        starts
    } else if inputs.iter().all(|i| i.header_start_s.is_some()) {
        let origin = inputs.iter().filter_map(|i| i.header_start_s).fold(f64::INFINITY, f64::min);
        inputs.iter().map(|i| i.header_start_s.unwrap_or(origin) - origin).collect()
    } else {
        inputs
            .iter()
            .scan(0.0, |t, i| {
                let s = *t;
                *t += i.duration_s;
                Some(s)
            })
            .collect()
    };

    let mut recordings: Vec<RecordingEntry> = inputs
        .iter()
        .zip(&starts)
        .map(|(i, &start_s)| RecordingEntry {
            path: PathBuf::from(&i.out_name),
            format: Format::Eegr,
            start_s,
            channel_labels: i.labels.clone(),
        })
        .collect();
    recordings.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    annotations.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    let manifest = Manifest { patient_id, channels: None, recordings, annotations };
    manifest.validate()?;
    let manifest_path = out_dir.join(MANIFEST);
    error::write(&manifest_path, manifest.to_toml())?;
    let outputs = inputs.iter().map(|i| out_dir.join(&i.out_name)).collect();
    Ok(Converted { manifest, manifest_path, outputs })
}
