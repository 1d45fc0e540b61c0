//! Model checkpoints: `"IXCK"`, `u16` version, the architecture tag and
//! geometry, the fitted input transform, then named `f32` parameters and
//! optionally their Adam state. Little-endian throughout.

use preictal_core::autodiff::Parameter;
use preictal_core::dsp::ChannelStats;
use preictal_core::models::{ArchConfig, ArchTag, InputKind, InputSpec, Model, Preprocessor};
use preictal_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"IXCK";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub preprocessor: Option<Preprocessor>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        v.iter().for_each(|x| self.0.extend_from_slice(&x.to_le_bytes()));
    }
    fn str(&mut self, s: &str) {
        self.u16(s.len() as u16);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos + n).ok_or(Error::Truncated {
            expected: (self.pos + n) as u64,
            actual: self.bytes.len() as u64,
            unit: "checkpoint bytes",
        })?;
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("tensor size overflows".into()))?)?;
        Ok(raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Parse { offset: at, message: "string is not UTF-8".into() })
    }
}

fn kind_code(k: InputKind) -> u8 {
    match k {
        InputKind::Image => 0,
        InputKind::SubImages => 1,
        InputKind::Sequence => 2,
    }
}

pub fn encode(model: &Model<f32>, pre: Option<&Preprocessor>, with_optimizer: bool) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u16(VERSION);
    let cfg = model.config();
    w.str(cfg.tag.as_str());
    for v in [cfg.channels, cfg.image_size, cfg.sub_image_size, cfg.sub_windows, cfg.sequence_len] {
        w.u32(v);
    }
    match pre {
        None => w.u8(0),
        Some(p) => {
            w.u8(1);
            let s = &p.spec;
            w.u8(kind_code(s.kind));
            w.u32(s.channels);
            w.f64(s.sampling_rate);
            w.f64(s.window_s);
            w.u32(s.image_size);
            w.f64(s.sub_window_s);
            w.u32(s.sub_image_size);
            w.u32(s.downsample);
            match &p.stats {
                None => w.u8(0),
                Some(st) => {
                    w.u8(1);
                    w.u32(st.mean.len());
                    st.mean.iter().chain(&st.std).for_each(|&v| w.f64(v));
                }
            }
        }
    }
    let params: Vec<&Parameter<f32>> = model.store().iter().collect();
    w.u32(params.len());
    for p in &params {
        w.str(&p.name);
        w.u8(p.value.ndim() as u8);
        p.value.shape().iter().for_each(|&d| w.u32(d));
        w.f32s(p.value.data());
    }
    w.u8(with_optimizer as u8);
    if with_optimizer {
        for p in &params {
            w.f32s(&p.m);
            w.f32s(&p.v);
            w.u64(p.step);
        }
    }
    w.0
}

/// Decodes a checkpoint; `expect` rejects a checkpoint of another
/// architecture.
pub fn decode(bytes: &[u8], expect: Option<ArchTag>) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Unsupported(format!("checkpoint version {version}")));
    }
    let tag: ArchTag = r.str()?.parse()?;
    if let Some(e) = expect {
        if e != tag {
            return Err(Error::Format(format!("checkpoint holds a {tag} model, expected {e}")));
        }
    }
    let mut cfg = ArchConfig::new(tag, r.u32()?);
    cfg.image_size = r.u32()?;
    cfg.sub_image_size = r.u32()?;
    cfg.sub_windows = r.u32()?;
    cfg.sequence_len = r.u32()?;
    let preprocessor = match r.u8()? {
        0 => None,
        _ => {
            let kind = match r.u8()? {
                0 => InputKind::Image,
                1 => InputKind::SubImages,
                2 => InputKind::Sequence,
                k => return Err(Error::Format(format!("unknown input kind {k}"))),
            };
            let mut spec = InputSpec::new(kind, r.u32()?, r.f64()?, r.f64()?);
            spec.image_size = r.u32()?;
            spec.sub_window_s = r.f64()?;
            spec.sub_image_size = r.u32()?;
            spec.downsample = r.u32()?;
            let stats = match r.u8()? {
                0 => None,
                _ => {
                    let c = r.u32()?;
                    let mean = (0..c).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                    let std = (0..c).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                    Some(ChannelStats { mean, std })
                }
            };
            Some(Preprocessor { spec, stats })
        }
    };
    let count = r.u32()?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.str()?;
        let ndim = r.u8()? as usize;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let value = Tensor::new(&shape, r.f32s(n)?)?;
        params.push(Parameter { name, value, m: vec![], v: vec![], step: 0 });
    }
    if r.u8()? == 1 {
        for p in &mut params {
            let n = p.value.len();
            p.m = r.f32s(n)?;
            p.v = r.f32s(n)?;
            p.step = r.u64()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut model = Model::<f32>::new(cfg, 0)?;
    model.store_mut().load(params)?;
    Ok(Checkpoint { model, preprocessor })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(tag: ArchTag) -> Model<f32> {
        let mut cfg = ArchConfig::new(tag, 2);
        cfg.image_size = 16;
        cfg.sub_image_size = 8;
        cfg.sub_windows = 2;
        cfg.sequence_len = 12;
        Model::new(cfg, 42).unwrap()
    }

    #[test]
    fn round_trip_preserves_predictions() {
        for tag in ArchTag::ALL {
            let m = small(tag);
            let pre = Preprocessor {
                spec: InputSpec::new(tag.input_kind(), 2, 64.0, 10.0),
                stats: Some(ChannelStats { mean: vec![0.5, -1.0], std: vec![2.0, 3.0] }),
            };
            let bytes = encode(&m, Some(&pre), true);
            let back = decode(&bytes, Some(tag)).unwrap();
            assert_eq!(back.preprocessor.as_ref(), Some(&pre));
            let mut shape = vec![1];
            shape.extend(m.config().sample_shape());
            let x = Tensor::from_fn(&shape, |i| (i as f32 * 0.1).sin());
            assert_eq!(m.predict(&x).unwrap(), back.model.predict(&x).unwrap());
        }
    }

    #[test]
    fn architecture_tag_is_checked() {
        let bytes = encode(&small(ArchTag::Tcn), None, false);
        assert!(decode(&bytes, Some(ArchTag::Cnn)).is_err());
        assert!(decode(&bytes, None).is_ok());
        assert!(decode(&bytes[..bytes.len() - 1], None).is_err());
    }
}
