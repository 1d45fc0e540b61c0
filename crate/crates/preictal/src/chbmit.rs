//! CHB-MIT `chbNN-summary.txt` files: per-file blocks giving the file's
//! wall-clock start and end and its seizure start/end times in seconds.

use preictal_core::recording::{validate_annotations, SeizureAnnotation};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryFile {
    pub name: String,
    /// Wall-clock start as seconds after midnight; CHB-MIT writes times past
    /// midnight as `24:xx:xx` and beyond.
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    pub seizures: Vec<SeizureAnnotation>,
}

fn clock(s: &str) -> Option<f64> {
    let parts: Vec<f64> = s.trim().split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().ok()?;
    match parts[..] {
        [h, m, sec] => Some(h * 3600.0 + m * 60.0 + sec),
        _ => None,
    }
}

fn seconds(value: &str, line: usize) -> Result<f64> {
    let v = value.trim().trim_end_matches("seconds").trim();
    v.parse().map_err(|_| Error::Format(format!("line {line}: '{value}' is not a number of seconds")))
}

fn invalid(msg: String) -> Error {
    Error::Core(preictal_core::Error::Validation(msg))
}

/// Parses the summary into per-file blocks in file order.
pub fn parse_summary(text: &str) -> Result<Vec<SummaryFile>> {
    let mut files: Vec<SummaryFile> = Vec::new();
    let mut declared: Vec<usize> = Vec::new();
    let mut pending_start: Option<f64> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let Some((key, value)) = raw.split_once(':') else { continue };
        let key = key.trim();
        let value = value.trim();
        if key == "File Name" {
            if let Some(s) = pending_start.take() {
                return Err(invalid(format!("line {line_no}: seizure starting at {s} s has no end time")));
            }
            files.push(SummaryFile { name: value.to_string(), start_s: None, end_s: None, seizures: vec![] });
            declared.push(0);
            continue;
        }
        let is_seizure = key.starts_with("Seizure") && (key.ends_with("Start Time") || key.ends_with("End Time"));
        let current = files.last_mut();
        match key {
            "File Start Time" | "File End Time" => {
                let f = current.ok_or_else(|| invalid(format!("line {line_no}: '{key}' outside a file block")))?;
                let t = clock(value).ok_or_else(|| Error::Format(format!("line {line_no}: bad clock time '{value}'")))?;
                if key == "File Start Time" {
                    f.start_s = Some(t);
                } else {
                    f.end_s = Some(t);
                }
            }
            "Number of Seizures in File" => {
                if files.is_empty() {
                    return Err(invalid(format!("line {line_no}: seizure count outside a file block")));
                }
                *declared.last_mut().expect("block") = value
                    .parse()
                    .map_err(|_| Error::Format(format!("line {line_no}: bad seizure count '{value}'")))?;
            }
            _ if is_seizure => {
                let f = current.ok_or_else(|| invalid(format!("line {line_no}: seizure declared before any file block")))?;
                let t = seconds(value, line_no)?;
                if key.ends_with("Start Time") {
                    if pending_start.replace(t).is_some() {
                        return Err(invalid(format!("line {line_no}: two seizure starts without an end")));
                    }
                } else {
                    let start = pending_start
                        .take()
                        .ok_or_else(|| invalid(format!("line {line_no}: seizure end without a start")))?;
                    if !(t > start) {
                        return Err(invalid(format!("line {line_no}: seizure ends at {t} s, before its start {start} s")));
                    }
                    f.seizures.push(SeizureAnnotation::new(start, t)?);
                }
            }
            _ => {}
        }
    }
    if let Some(s) = pending_start {
        return Err(invalid(format!("seizure starting at {s} s has no end time")));
    }
    for (f, &n) in files.iter_mut().zip(&declared) {
        if f.seizures.len() != n {
            return Err(invalid(format!("{} declares {} seizures but lists {}", f.name, n, f.seizures.len())));
        }
        f.seizures.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
        let duration = match (f.start_s, f.end_s) {
            (Some(a), Some(b)) => Some(if b >= a { b - a } else { b + 86_400.0 - a }),
            _ => None,
        };
        validate_annotations(&f.seizures, duration).map_err(|e| invalid(format!("{}: {e}", f.name)))?;
    }
    Ok(files)
}

/// Places each file on one patient timeline (seconds from the first file's
/// start), unwrapping clock times that cross midnight.
pub fn timeline_offsets(files: &[SummaryFile]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(files.len());
    let mut day = 0.0;
    let mut prev: Option<f64> = None;
    let mut origin = None;
    for f in files {
        let start = f.start_s.ok_or_else(|| invalid(format!("{} has no start time", f.name)))?;
        if let Some(p) = prev {
            if start + day < p {
                day += 86_400.0;
            }
        }
        let abs = start + day;
        let origin = *origin.get_or_insert(abs);
        out.push(abs - origin);
        prev = Some(abs);
    }
    Ok(out)
}
