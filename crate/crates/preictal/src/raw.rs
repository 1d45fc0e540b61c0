//! Raw-binary intermediate format:
//! `"EEGR"`, `u16` version (1), `u16` channels, `f64` sampling rate,
//! `u64` samples per channel, then `f32` samples, channel-major. All
//! little-endian.

use preictal_core::recording::Recording;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EEGR";
pub const VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 2 + 8 + 8;

pub fn write_raw(rec: &Recording) -> Result<Vec<u8>> {
    let channels = u16::try_from(rec.channels())
        .map_err(|_| Error::Format(format!("{} channels exceed the format limit", rec.channels())))?;
    let mut out = Vec::with_capacity(HEADER + 4 * rec.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&rec.sampling_rate().to_le_bytes());
    out.extend_from_slice(&(rec.samples_per_channel() as u64).to_le_bytes());
    for v in rec.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Reads a recording; channel labels are not stored and come back as
/// `EEG1`, `EEG2`, ... unless the caller relabels them.
pub fn read_raw(bytes: &[u8]) -> Result<Recording> {
    if bytes.len() < HEADER {
        return Err(Error::Truncated { expected: HEADER as u64, actual: bytes.len() as u64, unit: "header bytes" });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"EEGR\"", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Unsupported(format!("raw-binary version {version}")));
    }
    let channels = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let rate = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let samples = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let body = &bytes[HEADER..];
    let expected = (channels as u64).checked_mul(samples).ok_or_else(|| Error::Format("sample count overflows".into()))?;
    let actual = body.len() as u64 / 4;
    if actual < expected || body.len() % 4 != 0 {
        return Err(Error::Truncated { expected, actual, unit: "samples" });
    }
    if actual > expected {
        return Err(Error::Format(format!("{} bytes of trailing data", body.len() as u64 - 4 * expected)));
    }
    let data: Vec<f32> = body.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    let labels = (1..=channels).map(|c| format!("EEG{c}")).collect();
    Ok(Recording::new(rate, labels, data)?)
}
