//! The six architectures behind one [`Model`] type.
//!
//! Input layouts:
//! * `cnn`, `cnn_ae`: `N×C×I×I` spectrogram images.
//! * `cnn_lstm`, `cnn_lstm_ae`: `N×n×C×J×J` sub-window images.
//! * `tcn`, `tcn_ae`: `N×C×L` standardized, downsampled sequences.

mod input;
pub mod layers;

pub use input::{InputKind, InputSpec, Preprocessor};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::autodiff::{Causality, ParamStore, Session, Var};
use crate::error::{invalid, shape_err, Error, Result};
use crate::rng::rng_for;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use layers::{Conv1d, ConvBlock, Linear, Lstm, TemporalBlock, UpBlock};

pub const KERNEL: usize = 5;
pub const EMBEDDING: usize = 64;
pub const CNN_FILTERS: [usize; 3] = [8, 16, 32];
pub const CNN_FC: [usize; 2] = [128, 64];
pub const CNN_DROPOUT: f64 = 0.5;
pub const CNN_LSTM_FILTERS: [usize; 2] = [8, 16];
pub const CNN_LSTM_FEATURES: usize = 32;
pub const CNN_LSTM_HIDDEN: usize = 16;
pub const CNN_LSTM_LAYERS: usize = 2;
pub const CNN_LSTM_FC: usize = 96;
pub const TCN_BLOCKS: usize = 6;
pub const TCN_CHANNELS: usize = 32;
pub const TCN_DROPOUT: f64 = 0.2;
pub const TCN_FC: usize = 64;
pub const TCN_AE_BLOCKS: usize = 3;
pub const TCN_AE_CHANNELS: usize = 16;
pub const TCN_AE_BOTTLENECK: usize = 4;
pub const LSTM_AE_DECODER_HIDDEN: usize = 32;

/// Dilation of TCN block `index` (0-based).
pub fn tcn_dilation(index: usize) -> usize {
    1 << index
}

/// Number of input steps that can influence one output step of a stack of
/// residual blocks with two convolutions each.
pub fn tcn_receptive_field(kernel: usize, blocks: usize) -> usize {
    1 + 2 * (kernel - 1) * (0..blocks).map(tcn_dilation).sum::<usize>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchTag {
    Cnn,
    CnnLstm,
    Tcn,
    CnnAe,
    CnnLstmAe,
    TcnAe,
}

impl ArchTag {
    pub const ALL: [ArchTag; 6] =
        [ArchTag::Cnn, ArchTag::CnnLstm, ArchTag::Tcn, ArchTag::CnnAe, ArchTag::CnnLstmAe, ArchTag::TcnAe];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchTag::Cnn => "cnn",
            ArchTag::CnnLstm => "cnn_lstm",
            ArchTag::Tcn => "tcn",
            ArchTag::CnnAe => "cnn_ae",
            ArchTag::CnnLstmAe => "cnn_lstm_ae",
            ArchTag::TcnAe => "tcn_ae",
        }
    }

    pub fn is_autoencoder(self) -> bool {
        matches!(self, ArchTag::CnnAe | ArchTag::CnnLstmAe | ArchTag::TcnAe)
    }

    pub fn input_kind(self) -> InputKind {
        match self {
            ArchTag::Cnn | ArchTag::CnnAe => InputKind::Image,
            ArchTag::CnnLstm | ArchTag::CnnLstmAe => InputKind::SubImages,
            ArchTag::Tcn | ArchTag::TcnAe => InputKind::Sequence,
        }
    }
}

impl fmt::Display for ArchTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchTag::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| invalid!("unknown architecture '{}'", s))
    }
}

/// Architecture tag plus the input geometry it is built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub tag: ArchTag,
    pub channels: usize,
    /// Side of the square image (`cnn`, `cnn_ae`).
    pub image_size: usize,
    /// Side of each square sub-image (`cnn_lstm`, `cnn_lstm_ae`).
    pub sub_image_size: usize,
    /// Sub-windows per window (`cnn_lstm`, `cnn_lstm_ae`).
    pub sub_windows: usize,
    /// Downsampled sequence length (`tcn`, `tcn_ae`).
    pub sequence_len: usize,
}

impl ArchConfig {
    pub fn new(tag: ArchTag, channels: usize) -> Self {
        Self { tag, channels, image_size: 128, sub_image_size: 64, sub_windows: 6, sequence_len: 1920 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(invalid!("model needs at least one channel"));
        }
        match self.tag {
            ArchTag::Cnn | ArchTag::CnnAe => {
                if self.image_size == 0 || self.image_size % 8 != 0 {
                    return Err(invalid!("image size {} must be a positive multiple of 8", self.image_size));
                }
            }
            ArchTag::CnnLstm | ArchTag::CnnLstmAe => {
                if self.sub_windows < 1 {
                    return Err(invalid!("a window must hold at least one sub-window"));
                }
                if self.sub_image_size == 0 || self.sub_image_size % 4 != 0 {
                    return Err(invalid!("sub-image size {} must be a positive multiple of 4", self.sub_image_size));
                }
            }
            ArchTag::Tcn | ArchTag::TcnAe => {
                if self.sequence_len < 1 {
                    return Err(Error::EmptySequence);
                }
            }
        }
        Ok(())
    }

    /// Shape of one sample (without the batch dimension).
    pub fn sample_shape(&self) -> Vec<usize> {
        let c = self.channels;
        match self.tag.input_kind() {
            InputKind::Image => vec![c, self.image_size, self.image_size],
            InputKind::SubImages => vec![self.sub_windows, c, self.sub_image_size, self.sub_image_size],
            InputKind::Sequence => vec![c, self.sequence_len],
        }
    }
}

#[derive(Debug, Clone)]
struct Cnn {
    blocks: Vec<ConvBlock>,
    fc: [Linear; 3],
}

#[derive(Debug, Clone)]
struct CnnLstm {
    blocks: Vec<ConvBlock>,
    features: Linear,
    lstm: Lstm,
    fc: [Linear; 2],
}

#[derive(Debug, Clone)]
struct Tcn {
    blocks: Vec<TemporalBlock>,
    mix: Conv1d,
    fc: [Linear; 2],
}

#[derive(Debug, Clone)]
struct CnnAe {
    blocks: Vec<ConvBlock>,
    encode: Linear,
    decode: Linear,
    ups: Vec<UpBlock>,
}

#[derive(Debug, Clone)]
struct CnnLstmAe {
    blocks: Vec<ConvBlock>,
    features: Linear,
    encoder: Lstm,
    decoder: Lstm,
    expand: Linear,
    ups: Vec<UpBlock>,
}

#[derive(Debug, Clone)]
struct TcnAe {
    encoder: Vec<TemporalBlock>,
    squeeze: Conv1d,
    encode: Linear,
    decode: Linear,
    unsqueeze: Conv1d,
    decoder: Vec<TemporalBlock>,
    out: Conv1d,
}

#[derive(Debug, Clone)]
enum Net {
    Cnn(Cnn),
    CnnLstm(CnnLstm),
    Tcn(Tcn),
    CnnAe(CnnAe),
    CnnLstmAe(CnnLstmAe),
    TcnAe(TcnAe),
}

/// A built architecture with its parameters.
#[derive(Debug, Clone)]
pub struct Model<S> {
    config: ArchConfig,
    store: ParamStore<S>,
    net: Net,
}

fn conv_stack<S: Scalar>(
    store: &mut ParamStore<S>,
    prefix: &str,
    cin: usize,
    filters: &[usize],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<ConvBlock> {
    let mut c = cin;
    filters
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let b = ConvBlock::new(store, &alloc::format!("{prefix}.conv{i}"), c, f, KERNEL, rng);
            c = f;
            b
        })
        .collect()
}

/// Mirror of a conv stack: transposed convs back through `filters` reversed
/// and finally to `channels`, ReLU everywhere except the output.
fn up_stack<S: Scalar>(
    store: &mut ParamStore<S>,
    prefix: &str,
    filters: &[usize],
    channels: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<UpBlock> {
    let mut outs: Vec<usize> = filters.iter().rev().skip(1).copied().collect();
    outs.push(channels);
    let mut c = *filters.last().expect("non-empty stack");
    let last = outs.len() - 1;
    outs.iter()
        .enumerate()
        .map(|(i, &o)| {
            let b = UpBlock::new(store, &alloc::format!("{prefix}.deconv{i}"), c, o, i != last, rng);
            c = o;
            b
        })
        .collect()
}

fn tcn_stack<S: Scalar>(
    store: &mut ParamStore<S>,
    prefix: &str,
    cin: usize,
    width: usize,
    dilations: &[usize],
    mode: Causality,
    dropout: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<TemporalBlock> {
    let mut c = cin;
    dilations
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let b =
                TemporalBlock::new(store, &alloc::format!("{prefix}.block{i}"), c, width, KERNEL, d, mode, dropout, rng);
            c = width;
            b
        })
        .collect()
}

fn run_blocks<S: Scalar>(s: &mut Session<'_, S>, blocks: &[ConvBlock], mut x: Var) -> Result<Var> {
    for b in blocks {
        x = b.forward(s, x)?;
    }
    Ok(x)
}

fn run_temporal<S: Scalar>(s: &mut Session<'_, S>, blocks: &[TemporalBlock], mut x: Var) -> Result<Var> {
    for b in blocks {
        x = b.forward(s, x)?;
    }
    Ok(x)
}

fn run_ups<S: Scalar>(s: &mut Session<'_, S>, ups: &[UpBlock], mut x: Var) -> Result<Var> {
    for u in ups {
        x = u.forward(s, x)?;
    }
    Ok(x)
}

fn flatten<S: Scalar>(s: &mut Session<'_, S>, x: Var) -> Result<Var> {
    let shape = s.graph.shape(x);
    let n = shape[0];
    let rest = shape[1..].iter().product::<usize>();
    s.graph.reshape(x, &[n, rest])
}

impl<S: Scalar> Model<S> {
    /// Builds `config` with parameters drawn from a stream derived from `seed`.
    pub fn new(config: ArchConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, &[0x6d6f_6465_6c]);
        let rng = &mut rng;
        let mut store = ParamStore::new();
        let st = &mut store;
        let c = config.channels;
        let net = match config.tag {
            ArchTag::Cnn => {
                let blocks = conv_stack(st, "cnn", c, &CNN_FILTERS, rng);
                let side = config.image_size / 8;
                let flat = CNN_FILTERS[2] * side * side;
                Net::Cnn(Cnn {
                    blocks,
                    fc: [
                        Linear::new(st, "cnn.fc0", flat, CNN_FC[0], rng),
                        Linear::new(st, "cnn.fc1", CNN_FC[0], CNN_FC[1], rng),
                        Linear::new(st, "cnn.fc2", CNN_FC[1], 2, rng),
                    ],
                })
            }
            ArchTag::CnnLstm => {
                let blocks = conv_stack(st, "cnn_lstm", c, &CNN_LSTM_FILTERS, rng);
                let side = config.sub_image_size / 4;
                let flat = CNN_LSTM_FILTERS[1] * side * side;
                Net::CnnLstm(CnnLstm {
                    blocks,
                    features: Linear::new(st, "cnn_lstm.features", flat, CNN_LSTM_FEATURES, rng),
                    lstm: Lstm::new(st, "cnn_lstm.lstm", CNN_LSTM_FEATURES, CNN_LSTM_HIDDEN, CNN_LSTM_LAYERS, rng),
                    fc: [
                        Linear::new(st, "cnn_lstm.fc0", CNN_LSTM_HIDDEN, CNN_LSTM_FC, rng),
                        Linear::new(st, "cnn_lstm.fc1", CNN_LSTM_FC, 2, rng),
                    ],
                })
            }
            ArchTag::Tcn => {
                let dil: Vec<usize> = (0..TCN_BLOCKS).map(tcn_dilation).collect();
                Net::Tcn(Tcn {
                    blocks: tcn_stack(st, "tcn", c, TCN_CHANNELS, &dil, Causality::Causal, TCN_DROPOUT, rng),
                    mix: Conv1d::new(st, "tcn.mix", TCN_CHANNELS, TCN_CHANNELS, 1, rng),
                    fc: [
                        Linear::new(st, "tcn.fc0", TCN_CHANNELS, TCN_FC, rng),
                        Linear::new(st, "tcn.fc1", TCN_FC, 2, rng),
                    ],
                })
            }
            ArchTag::CnnAe => {
                let blocks = conv_stack(st, "cnn_ae.enc", c, &CNN_FILTERS, rng);
                let side = config.image_size / 8;
                let flat = CNN_FILTERS[2] * side * side;
                Net::CnnAe(CnnAe {
                    blocks,
                    encode: Linear::new(st, "cnn_ae.embed", flat, EMBEDDING, rng),
                    decode: Linear::new(st, "cnn_ae.expand", EMBEDDING, flat, rng),
                    ups: up_stack(st, "cnn_ae.dec", &CNN_FILTERS, c, rng),
                })
            }
            ArchTag::CnnLstmAe => {
                let blocks = conv_stack(st, "cnn_lstm_ae.enc", c, &CNN_LSTM_FILTERS, rng);
                let side = config.sub_image_size / 4;
                let flat = CNN_LSTM_FILTERS[1] * side * side;
                Net::CnnLstmAe(CnnLstmAe {
                    blocks,
                    features: Linear::new(st, "cnn_lstm_ae.features", flat, CNN_LSTM_FEATURES, rng),
                    encoder: Lstm::new(st, "cnn_lstm_ae.encoder", CNN_LSTM_FEATURES, EMBEDDING, 1, rng),
                    decoder: Lstm::new(st, "cnn_lstm_ae.decoder", EMBEDDING, LSTM_AE_DECODER_HIDDEN, 1, rng),
                    expand: Linear::new(st, "cnn_lstm_ae.expand", LSTM_AE_DECODER_HIDDEN, flat, rng),
                    ups: up_stack(st, "cnn_lstm_ae.dec", &CNN_LSTM_FILTERS, c, rng),
                })
            }
            ArchTag::TcnAe => {
                let dil: Vec<usize> = (0..TCN_AE_BLOCKS).map(tcn_dilation).collect();
                let rev: Vec<usize> = dil.iter().rev().copied().collect();
                let flat = TCN_AE_BOTTLENECK * config.sequence_len;
                let w = TCN_AE_CHANNELS;
                Net::TcnAe(TcnAe {
                    encoder: tcn_stack(st, "tcn_ae.enc", c, w, &dil, Causality::Causal, 0.0, rng),
                    squeeze: Conv1d::new(st, "tcn_ae.squeeze", w, TCN_AE_BOTTLENECK, 1, rng),
                    encode: Linear::new(st, "tcn_ae.embed", flat, EMBEDDING, rng),
                    decode: Linear::new(st, "tcn_ae.expand", EMBEDDING, flat, rng),
                    unsqueeze: Conv1d::new(st, "tcn_ae.unsqueeze", TCN_AE_BOTTLENECK, w, 1, rng),
                    decoder: tcn_stack(st, "tcn_ae.dec", w, w, &rev, Causality::AntiCausal, 0.0, rng),
                    out: Conv1d::output(st, "tcn_ae.out", w, c, rng),
                })
            }
        };
        Ok(Self { config, store, net })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn tag(&self) -> ArchTag {
        self.config.tag
    }

    pub fn store(&self) -> &ParamStore<S> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.store
    }

    pub fn parameter_count(&self) -> usize {
        self.store.count()
    }

    fn check_input(&self, shape: &[usize]) -> Result<usize> {
        let want = self.config.sample_shape();
        let ok = match self.config.tag {
            // The classifier head averages over time, so any length works.
            ArchTag::Tcn => shape.len() == 3 && shape[1] == want[0] && shape[2] >= 1,
            _ => shape.len() == want.len() + 1 && shape[1..] == want[..],
        };
        if !ok || shape[0] == 0 {
            if self.config.tag == ArchTag::Tcn && shape.len() == 3 && shape[2] == 0 {
                return Err(Error::EmptySequence);
            }
            return Err(shape_err!("{} expects N×{:?}, got {:?}", self.config.tag, want, shape));
        }
        Ok(shape[0])
    }

    /// Logits (`N×2`) for classifiers, reconstruction (input-shaped) for
    /// autoencoders.
    pub fn forward(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let n = self.check_input(s.graph.shape(x))?;
        match &self.net {
            Net::Cnn(m) => {
                let h = run_blocks(s, &m.blocks, x)?;
                let mut h = flatten(s, h)?;
                for fc in &m.fc[..2] {
                    h = fc.forward(s, h)?;
                    h = s.graph.relu(h);
                    h = s.dropout(h, CNN_DROPOUT)?;
                }
                m.fc[2].forward(s, h)
            }
            Net::CnnLstm(m) => {
                let seq = self.sub_image_features(s, &m.blocks, &m.features, x, n)?;
                let out = m.lstm.forward(s, seq)?;
                let last = s.graph.select_step(out, self.config.sub_windows - 1)?;
                let h = m.fc[0].forward(s, last)?;
                let h = s.graph.relu(h);
                let h = s.dropout(h, CNN_DROPOUT)?;
                m.fc[1].forward(s, h)
            }
            Net::Tcn(m) => {
                let h = run_temporal(s, &m.blocks, x)?;
                let h = m.mix.forward(s, h)?;
                let h = s.graph.mean_time(h)?;
                let h = m.fc[0].forward(s, h)?;
                let h = s.graph.relu(h);
                m.fc[1].forward(s, h)
            }
            Net::CnnAe(m) => {
                let z = self.embed(s, x)?;
                let h = m.decode.forward(s, z)?;
                let h = s.graph.relu(h);
                let side = self.config.image_size / 8;
                let h = s.graph.reshape(h, &[n, CNN_FILTERS[2], side, side])?;
                run_ups(s, &m.ups, h)
            }
            Net::CnnLstmAe(m) => {
                let z = self.embed(s, x)?;
                let steps = vec![z; self.config.sub_windows];
                let mut outs = m.decoder.forward_steps(s, &steps)?;
                // The decoder unrolls the sequence back to front.
                outs.reverse();
                let seq = s.graph.stack_steps(&outs)?;
                let nn = n * self.config.sub_windows;
                let flat = s.graph.reshape(seq, &[nn, LSTM_AE_DECODER_HIDDEN])?;
                let h = m.expand.forward(s, flat)?;
                let h = s.graph.relu(h);
                let side = self.config.sub_image_size / 4;
                let h = s.graph.reshape(h, &[nn, CNN_LSTM_FILTERS[1], side, side])?;
                let y = run_ups(s, &m.ups, h)?;
                let mut shape = vec![n];
                shape.extend(self.config.sample_shape());
                s.graph.reshape(y, &shape)
            }
            Net::TcnAe(m) => {
                let z = self.embed(s, x)?;
                let h = m.decode.forward(s, z)?;
                let h = s.graph.relu(h);
                let h = s.graph.reshape(h, &[n, TCN_AE_BOTTLENECK, self.config.sequence_len])?;
                let h = m.unsqueeze.forward(s, h)?;
                let h = run_temporal(s, &m.decoder, h)?;
                m.out.forward(s, h)
            }
        }
    }

    fn sub_image_features(
        &self,
        s: &mut Session<'_, S>,
        blocks: &[ConvBlock],
        features: &Linear,
        x: Var,
        n: usize,
    ) -> Result<Var> {
        let cfg = &self.config;
        let j = cfg.sub_image_size;
        let nn = n * cfg.sub_windows;
        let imgs = s.graph.reshape(x, &[nn, cfg.channels, j, j])?;
        let h = run_blocks(s, blocks, imgs)?;
        let h = flatten(s, h)?;
        let h = features.forward(s, h)?;
        let h = s.graph.relu(h);
        s.graph.reshape(h, &[n, cfg.sub_windows, CNN_LSTM_FEATURES])
    }

    /// The `N×64` bottleneck of an autoencoder.
    pub fn embed(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let n = self.check_input(s.graph.shape(x))?;
        match &self.net {
            Net::CnnAe(m) => {
                let h = run_blocks(s, &m.blocks, x)?;
                let h = flatten(s, h)?;
                m.encode.forward(s, h)
            }
            Net::CnnLstmAe(m) => {
                let seq = self.sub_image_features(s, &m.blocks, &m.features, x, n)?;
                let out = m.encoder.forward(s, seq)?;
                s.graph.select_step(out, self.config.sub_windows - 1)
            }
            Net::TcnAe(m) => {
                let h = run_temporal(s, &m.encoder, x)?;
                let h = m.squeeze.forward(s, h)?;
                let h = flatten(s, h)?;
                m.encode.forward(s, h)
            }
            _ => Err(invalid!("{} has no embedding", self.config.tag)),
        }
    }

    /// Per-step output of the residual stack (`N×32×L`) of a `tcn`.
    pub fn temporal_features(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        self.check_input(s.graph.shape(x))?;
        match &self.net {
            Net::Tcn(m) => run_temporal(s, &m.blocks, x),
            _ => Err(invalid!("{} has no temporal feature stack", self.config.tag)),
        }
    }

    /// Eval-mode forward on a batch; rejects non-finite outputs.
    pub fn predict(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut s = Session::eval(&self.store);
        let v = s.input(x.clone());
        let y = self.forward(&mut s, v)?;
        let out = s.graph.value(y).clone();
        if !out.all_finite() {
            return Err(Error::NonFinite("model output"));
        }
        if self.config.tag.is_autoencoder() && out.shape() != x.shape() {
            return Err(shape_err!("reconstruction {:?} differs from input {:?}", out.shape(), x.shape()));
        }
        Ok(out)
    }

    /// Softmax probability of the preictal class for each sample.
    pub fn preictal_probabilities(&self, x: &Tensor<S>) -> Result<Vec<f64>> {
        if self.config.tag.is_autoencoder() {
            return Err(invalid!("{} is not a classifier", self.config.tag));
        }
        let logits = self.predict(x)?;
        Ok(logits
            .data()
            .chunks(2)
            .map(|l| {
                let (a, b) = (l[0].as_f64(), l[1].as_f64());
                1.0 / (1.0 + num_traits::Float::exp(a - b))
            })
            .collect())
    }

    /// Mean squared reconstruction error of each sample.
    pub fn anomaly_scores(&self, x: &Tensor<S>) -> Result<Vec<f64>> {
        if !self.config.tag.is_autoencoder() {
            return Err(invalid!("{} is not an autoencoder", self.config.tag));
        }
        let recon = self.predict(x)?;
        Ok(reconstruction_errors(x.data(), recon.data(), x.shape()[0]))
    }
}

/// Per-sample mean squared difference of two equally shaped batches.
pub fn reconstruction_errors<S: Scalar>(input: &[S], recon: &[S], batch: usize) -> Vec<f64> {
    if batch == 0 {
        return Vec::new();
    }
    let per = input.len() / batch;
    input
        .chunks(per)
        .zip(recon.chunks(per))
        .map(|(a, b)| {
            a.iter().zip(b).map(|(&p, &q)| (p.as_f64() - q.as_f64()) * (p.as_f64() - q.as_f64())).sum::<f64>()
                / per as f64
        })
        .collect()
}

impl fmt::Display for ArchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.tag, self.sample_shape())
    }
}
