//! European Data Format: a 256-byte ASCII header, 256 bytes of ASCII header
//! per signal, then data records of little-endian `i16` samples.

use preictal_core::recording::Recording;

use crate::error::{Error, Result};

const MAIN_HEADER: usize = 256;
const SIGNAL_HEADER: usize = 256;
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

#[derive(Debug, Clone, PartialEq)]
pub struct EdfSignal {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefilter: String,
    pub samples_per_record: usize,
}

impl EdfSignal {
    pub fn is_annotation(&self) -> bool {
        self.label == ANNOTATION_LABEL
    }

    /// Physical units per digital step.
    pub fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64
    }

    pub fn to_physical(&self, digital: i16) -> f64 {
        self.physical_min + (digital as i32 - self.digital_min) as f64 * self.gain()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub patient: String,
    pub recording: String,
    /// `dd.mm.yy`
    pub start_date: String,
    /// `hh.mm.ss`
    pub start_time: String,
    pub header_bytes: usize,
    /// `None` when the header declares `-1` (unknown).
    pub records: Option<usize>,
    pub record_duration_s: f64,
    pub signals: Vec<EdfSignal>,
}

impl EdfHeader {
    pub fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| 2 * s.samples_per_record).sum()
    }

    /// Seconds since 1985-01-01 00:00:00 of the recording start (EDF years
    /// 85-99 are 19xx, 00-84 are 20xx).
    pub fn start_seconds(&self) -> Result<f64> {
        let field = |s: &str, what: &str| -> Result<Vec<i64>> {
            let parts: Vec<i64> = s.split('.').map(|p| p.trim().parse::<i64>()).collect::<Result<_, _>>().map_err(|_| {
                Error::Format(format!("{what} '{s}' is not of the form nn.nn.nn"))
            })?;
            if parts.len() != 3 {
                return Err(Error::Format(format!("{what} '{s}' is not of the form nn.nn.nn")));
            }
            Ok(parts)
        };
        let d = field(&self.start_date, "start date")?;
        let t = field(&self.start_time, "start time")?;
        let year = if d[2] >= 85 { 1900 + d[2] } else { 2000 + d[2] };
        let days = days_from_civil(year, d[1], d[0]) - days_from_civil(1985, 1, 1);
        Ok((days * 86_400 + t[0] * 3600 + t[1] * 60 + t[2]) as f64)
    }
}

fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn text(&mut self, len: usize) -> Result<(usize, &'a str)> {
        let at = self.pos;
        let raw = self.bytes.get(at..at + len).ok_or(Error::Truncated {
            expected: (at + len) as u64,
            actual: self.bytes.len() as u64,
            unit: "header bytes",
        })?;
        self.pos += len;
        if let Some(i) = raw.iter().position(|b| !(0x20..=0x7e).contains(b)) {
            return Err(Error::Parse { offset: at + i, message: format!("non-ASCII byte 0x{:02x}", raw[i]) });
        }
        Ok((at, std::str::from_utf8(raw).expect("ASCII").trim()))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        Ok(self.text(len)?.1.to_string())
    }

    fn number<T: std::str::FromStr>(&mut self, len: usize, what: &str) -> Result<T> {
        let (at, s) = self.text(len)?;
        s.parse().map_err(|_| Error::Parse { offset: at, message: format!("{what}: '{s}' is not a number") })
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<EdfHeader> {
    let mut c = Cursor { bytes, pos: 0 };
    let (at, version) = c.text(8)?;
    if version != "0" {
        return Err(Error::Parse { offset: at, message: format!("version '{version}' is not '0'") });
    }
    let patient = c.string(80)?;
    let recording = c.string(80)?;
    let start_date = c.string(8)?;
    let start_time = c.string(8)?;
    let header_bytes: usize = c.number(8, "header size")?;
    let (at, reserved) = c.text(44)?;
    if reserved.starts_with("EDF+D") {
        return Err(Error::Unsupported(format!("discontinuous EDF+ (byte {at})")));
    }
    let records_at = c.pos;
    let records: i64 = c.number(8, "number of data records")?;
    let record_duration_s: f64 = c.number(8, "record duration")?;
    let ns_at = c.pos;
    let ns: usize = c.number(4, "number of signals")?;
    if header_bytes != MAIN_HEADER + ns * SIGNAL_HEADER {
        return Err(Error::Parse {
            offset: ns_at,
            message: format!("header size {header_bytes} does not match {ns} signals"),
        });
    }
    let records = match records {
        -1 => None,
        n if n >= 0 => Some(n as usize),
        n => return Err(Error::Parse { offset: records_at, message: format!("negative record count {n}") }),
    };
    // Per-signal fields are stored field-major: all labels, then all
    // transducers, and so on.
    let mut col = |len: usize| -> Result<Vec<String>> { (0..ns).map(|_| c.string(len)).collect() };
    let labels = col(16)?;
    let transducers = col(80)?;
    let dims = col(8)?;
    let field_start = c.pos;
    let mut nums = |len: usize, what: &str| -> Result<Vec<f64>> {
        (0..ns).map(|_| c.number::<f64>(len, what)).collect()
    };
    let pmin = nums(8, "physical minimum")?;
    let pmax = nums(8, "physical maximum")?;
    let dmin = nums(8, "digital minimum")?;
    let dmax = nums(8, "digital maximum")?;
    let prefilters: Vec<String> = (0..ns).map(|_| c.string(80)).collect::<Result<_>>()?;
    let spr: Vec<usize> = (0..ns).map(|_| c.number::<usize>(8, "samples per record")).collect::<Result<_>>()?;
    let _reserved: Vec<String> = (0..ns).map(|_| c.string(32)).collect::<Result<_>>()?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let (dlo, dhi) = (dmin[i] as i32, dmax[i] as i32);
        if dlo >= dhi || dlo < i16::MIN as i32 || dhi > i16::MAX as i32 {
            return Err(Error::Parse {
                offset: field_start + 16 * ns + 8 * i,
                message: format!("signal {i}: digital range {dlo}..{dhi} is empty or exceeds 16 bits"),
            });
        }
        if pmin[i] == pmax[i] {
            return Err(Error::Parse {
                offset: field_start + 8 * i,
                message: format!("signal {i}: physical range is empty"),
            });
        }
        signals.push(EdfSignal {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dlo,
            digital_max: dhi,
            prefilter: prefilters[i].clone(),
            samples_per_record: spr[i],
        });
    }
    Ok(EdfHeader { patient, recording, start_date, start_time, header_bytes, records, record_duration_s, signals })
}

/// Parses a whole EDF file. Annotation signals are dropped; the remaining
/// signals must share one sampling rate.
pub fn parse_edf(bytes: &[u8]) -> Result<Recording> {
    let header = parse_header(bytes)?;
    let data = &bytes[header.header_bytes..];
    let record_bytes = header.record_bytes();
    if record_bytes == 0 {
        return Err(Error::Format("EDF file has no samples per record".into()));
    }
    let available = data.len() / record_bytes;
    let records = match header.records {
        Some(n) => {
            if available < n {
                return Err(Error::Truncated { expected: n as u64, actual: available as u64, unit: "data records" });
            }
            n
        }
        None => {
            if data.len() % record_bytes != 0 {
                return Err(Error::Truncated {
                    expected: available as u64 + 1,
                    actual: available as u64,
                    unit: "data records",
                });
            }
            available
        }
    };
    let keep: Vec<usize> = (0..header.signals.len()).filter(|&i| !header.signals[i].is_annotation()).collect();
    if keep.is_empty() {
        return Err(Error::Format("EDF file has no signal channels".into()));
    }
    let spr = header.signals[keep[0]].samples_per_record;
    if let Some(&i) = keep.iter().find(|&&i| header.signals[i].samples_per_record != spr) {
        return Err(Error::Unsupported(format!(
            "signal '{}' has {} samples per record, expected {} (mixed sampling rates)",
            header.signals[i].label, header.signals[i].samples_per_record, spr
        )));
    }
    if !(header.record_duration_s > 0.0) {
        return Err(Error::Format(format!("record duration {} s is not positive", header.record_duration_s)));
    }
    let rate = spr as f64 / header.record_duration_s;

    let mut offsets = Vec::with_capacity(header.signals.len());
    let mut acc = 0;
    for s in &header.signals {
        offsets.push(acc);
        acc += 2 * s.samples_per_record;
    }
    let mut channels: Vec<Vec<f32>> = keep.iter().map(|_| Vec::with_capacity(records * spr)).collect();
    for r in 0..records {
        let rec = &data[r * record_bytes..(r + 1) * record_bytes];
        for (out, &i) in channels.iter_mut().zip(&keep) {
            let sig = &header.signals[i];
            let raw = &rec[offsets[i]..offsets[i] + 2 * spr];
            out.extend(raw.chunks_exact(2).map(|b| sig.to_physical(i16::from_le_bytes([b[0], b[1]])) as f32));
        }
    }
    let labels = keep.iter().map(|&i| header.signals[i].label.clone()).collect();
    Ok(Recording::from_channels(rate, labels, channels)?)
}

/// Formats `v` in at most `width` characters, rounding toward `-∞` when
/// `down`, else toward `+∞`.
fn fit_number(v: f64, width: usize, down: bool) -> String {
    for decimals in (0..=6).rev() {
        let scale = 10f64.powi(decimals);
        let r = if down { (v * scale).floor() / scale } else { (v * scale).ceil() / scale };
        let s = format!("{:.*}", decimals as usize, r);
        if s.len() <= width {
            return s;
        }
    }
    format!("{}", if down { v.floor() } else { v.ceil() } as i64)
}

fn pad(out: &mut Vec<u8>, s: &str, width: usize) -> Result<()> {
    if s.len() > width || !s.is_ascii() {
        return Err(Error::Format(format!("'{s}' does not fit an EDF field of {width} ASCII bytes")));
    }
    out.extend_from_slice(s.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - s.len()));
    Ok(())
}

/// Options for [`write_edf`].
#[derive(Debug, Clone)]
pub struct EdfWriteOptions {
    pub patient: String,
    pub recording: String,
    pub start_date: String,
    pub start_time: String,
    pub record_duration_s: f64,
    pub physical_dimension: String,
}

impl Default for EdfWriteOptions {
    fn default() -> Self {
        Self {
            patient: "X X X X".into(),
            recording: "Startdate X X X X".into(),
            start_date: "01.01.85".into(),
            start_time: "00.00.00".into(),
            record_duration_s: 1.0,
            physical_dimension: "uV".into(),
        }
    }
}

/// Encodes a recording using the full 16-bit digital range per channel. The
/// physical range of each channel is its data range, widened outward to
/// what fits the 8-character header fields.
pub fn write_edf(rec: &Recording, opts: &EdfWriteOptions) -> Result<Vec<u8>> {
    let spr_f = rec.sampling_rate() * opts.record_duration_s;
    let spr = spr_f.round() as usize;
    if spr == 0 || (spr_f - spr as f64).abs() > 1e-9 {
        return Err(Error::Format(format!(
            "{} Hz × {} s records is not a whole number of samples",
            rec.sampling_rate(),
            opts.record_duration_s
        )));
    }
    let n = rec.samples_per_channel();
    if n % spr != 0 {
        return Err(Error::Format(format!("{n} samples do not fill whole {spr}-sample records")));
    }
    let records = n / spr;
    let ns = rec.channels();
    let (dmin, dmax) = (i16::MIN as i32, i16::MAX as i32);
    let mut signals = Vec::with_capacity(ns);
    for c in 0..ns {
        let x = rec.channel(c);
        let lo = x.iter().fold(f64::INFINITY, |a, &v| a.min(v as f64));
        let hi = x.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v as f64));
        let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else if lo.is_finite() { (lo - 1.0, lo + 1.0) } else { (-1.0, 1.0) };
        let pmin_s = fit_number(lo, 8, true);
        let pmax_s = fit_number(hi, 8, false);
        signals.push((pmin_s.parse::<f64>().expect("formatted"), pmax_s.parse::<f64>().expect("formatted"), pmin_s, pmax_s));
    }

    let header_bytes = MAIN_HEADER + ns * SIGNAL_HEADER;
    let mut out = Vec::with_capacity(header_bytes + records * ns * spr * 2);
    pad(&mut out, "0", 8)?;
    pad(&mut out, &opts.patient, 80)?;
    pad(&mut out, &opts.recording, 80)?;
    pad(&mut out, &opts.start_date, 8)?;
    pad(&mut out, &opts.start_time, 8)?;
    pad(&mut out, &header_bytes.to_string(), 8)?;
    pad(&mut out, "", 44)?;
    pad(&mut out, &records.to_string(), 8)?;
    pad(&mut out, &fit_number(opts.record_duration_s, 8, false), 8)?;
    pad(&mut out, &ns.to_string(), 4)?;
    for label in rec.channel_labels() {
        pad(&mut out, label, 16)?;
    }
    for _ in 0..ns {
        pad(&mut out, "", 80)?;
    }
    for _ in 0..ns {
        pad(&mut out, &opts.physical_dimension, 8)?;
    }
    for s in &signals {
        pad(&mut out, &s.2, 8)?;
    }
    for s in &signals {
        pad(&mut out, &s.3, 8)?;
    }
    for _ in 0..ns {
        pad(&mut out, &dmin.to_string(), 8)?;
    }
    for _ in 0..ns {
        pad(&mut out, &dmax.to_string(), 8)?;
    }
    for _ in 0..ns {
        pad(&mut out, "", 80)?;
    }
    for _ in 0..ns {
        pad(&mut out, &spr.to_string(), 8)?;
    }
    for _ in 0..ns {
        pad(&mut out, "", 32)?;
    }
    debug_assert_eq!(out.len(), header_bytes);
    let steps = (dmax - dmin) as f64;
    for r in 0..records {
        for (c, &(pmin, pmax, _, _)) in signals.iter().enumerate() {
            let scale = steps / (pmax - pmin);
            for &v in &rec.channel(c)[r * spr..(r + 1) * spr] {
                let d = ((v as f64 - pmin) * scale + dmin as f64).round().clamp(dmin as f64, dmax as f64) as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_signal() -> Recording {
        let a: Vec<f32> = (0..2560).map(|i| (i as f32 * 0.05).sin() * 100.0).collect();
        let b: Vec<f32> = (0..2560).map(|i| (i % 97) as f32 - 40.0).collect();
        Recording::from_channels(256.0, vec!["FP1-F7".into(), "F7-T7".into()], vec![a, b]).unwrap()
    }

    #[test]
    fn round_trip_within_one_step() {
        let rec = two_signal();
        let bytes = write_edf(&rec, &EdfWriteOptions::default()).unwrap();
        let header = parse_header(&bytes).unwrap();
        assert_eq!(header.records, Some(10));
        let back = parse_edf(&bytes).unwrap();
        assert_eq!(back.channels(), 2);
        assert_eq!(back.samples_per_channel(), 2560);
        assert_eq!(back.sampling_rate(), 256.0);
        assert_eq!(back.channel_labels(), rec.channel_labels());
        for c in 0..2 {
            let step = header.signals[c].gain();
            for (x, y) in rec.channel(c).iter().zip(back.channel(c)) {
                assert!(((x - y) as f64).abs() <= step, "{x} vs {y}");
            }
        }
    }

    fn handmade(digital: &[i16], pmin: &str, pmax: &str, dmin: &str, dmax: &str, extra: &[(&str, usize)]) -> Vec<u8> {
        let ns = 1 + extra.len();
        let mut out = Vec::new();
        pad(&mut out, "0", 8).unwrap();
        pad(&mut out, "", 160).unwrap();
        pad(&mut out, "01.01.85", 8).unwrap();
        pad(&mut out, "00.00.00", 8).unwrap();
        pad(&mut out, &(256 + 256 * ns).to_string(), 8).unwrap();
        pad(&mut out, "", 44).unwrap();
        pad(&mut out, "1", 8).unwrap();
        pad(&mut out, "1", 8).unwrap();
        pad(&mut out, &ns.to_string(), 4).unwrap();
        let labels: Vec<&str> = std::iter::once("C3").chain(extra.iter().map(|e| e.0)).collect();
        let spr: Vec<usize> = std::iter::once(digital.len()).chain(extra.iter().map(|e| e.1)).collect();
        labels.iter().for_each(|l| pad(&mut out, l, 16).unwrap());
        (0..ns).for_each(|_| pad(&mut out, "", 88).unwrap());
        (0..ns).for_each(|_| pad(&mut out, pmin, 8).unwrap());
        (0..ns).for_each(|_| pad(&mut out, pmax, 8).unwrap());
        (0..ns).for_each(|_| pad(&mut out, dmin, 8).unwrap());
        (0..ns).for_each(|_| pad(&mut out, dmax, 8).unwrap());
        (0..ns).for_each(|_| pad(&mut out, "", 80).unwrap());
        spr.iter().for_each(|n| pad(&mut out, &n.to_string(), 8).unwrap());
        (0..ns).for_each(|_| pad(&mut out, "", 32).unwrap());
        for d in digital {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &(_, n) in extra {
            out.extend(std::iter::repeat_n(0u8, 2 * n));
        }
        out
    }

    #[test]
    fn identity_map_keeps_raw_integers() {
        let bytes = handmade(&[-3, 0, 7, 12], "-32768", "32767", "-32768", "32767", &[]);
        let rec = parse_edf(&bytes).unwrap();
        assert_eq!(rec.channel(0), &[-3.0, 0.0, 7.0, 12.0]);
        assert_eq!(rec.sampling_rate(), 4.0);
    }

    #[test]
    fn annotation_signals_are_dropped() {
        let bytes = handmade(&[1, 2], "-32768", "32767", "-32768", "32767", &[(ANNOTATION_LABEL, 30)]);
        let rec = parse_edf(&bytes).unwrap();
        assert_eq!(rec.channels(), 1);
        assert_eq!(rec.channel_labels(), &["C3".to_string()]);
    }

    #[test]
    fn truncated_records_are_reported() {
        let bytes = write_edf(&two_signal(), &EdfWriteOptions::default()).unwrap();
        let cut = &bytes[..bytes.len() - 100];
        match parse_edf(cut) {
            Err(Error::Truncated { expected: 10, actual: 9, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_fields_name_their_offset() {
        let mut bytes = handmade(&[1, 2], "-32768", "32767", "-32768", "32767", &[]);
        bytes[236..244].copy_from_slice(b"ten     ");
        match parse_edf(&bytes) {
            Err(Error::Parse { offset: 236, .. }) => {}
            other => panic!("{other:?}"),
        }
        bytes[236..244].copy_from_slice(b"1       ");
        bytes[10] = 0xC3;
        match parse_edf(&bytes) {
            Err(Error::Parse { offset: 10, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn start_time_arithmetic() {
        let mut h = parse_header(&handmade(&[0], "-1", "1", "-32768", "32767", &[])).unwrap();
        assert_eq!(h.start_seconds().unwrap(), 0.0);
        h.start_date = "02.01.85".into();
        h.start_time = "01.00.05".into();
        assert_eq!(h.start_seconds().unwrap(), 86_400.0 + 3605.0);
        h.start_date = "01.01.00".into();
        assert!(h.start_seconds().unwrap() > 0.0);
    }

    #[test]
    fn numbers_fit_eight_characters() {
        assert_eq!(fit_number(-123.456789, 8, true), "-123.457");
        assert_eq!(fit_number(123.456789, 8, false), "123.4568");
        assert_eq!(fit_number(-0.5, 8, true), "-0.50000");
        assert!(fit_number(-123456.7, 8, true).parse::<f64>().unwrap() <= -123456.7);
    }
}
