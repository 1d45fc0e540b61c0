//! Parameterized building blocks. Each layer registers its tensors in a
//! [`ParamStore`] at construction and reads them back through a [`Session`].

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Causality, Graph, ParamId, ParamStore, Session, Var};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn uniform<S: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor<S> {
    Tensor::from_fn(shape, |_| S::of((rng.gen::<f64>() * 2.0 - 1.0) * bound))
}

/// He-style uniform bound for a layer with `fan_in` inputs.
fn he_bound(fan_in: usize) -> f64 {
    Float::sqrt(6.0 / fan_in.max(1) as f64)
}

/// Shrinks the init of linear reconstruction heads so an autoencoder starts
/// near the all-zero output instead of far above the input variance. Without
/// it the first updates mostly cut activations and can kill the decoder.
const OUTPUT_INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<S: Scalar>(store: &mut ParamStore<S>, name: &str, inp: usize, out: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = store.add(format!("{name}.weight"), uniform(rng, &[out, inp], he_bound(inp)));
        let b = store.add(format!("{name}.bias"), Tensor::zeros(&[out]));
        Self { w, b }
    }

    pub fn forward<S: Scalar>(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let (w, b) = (s.param(self.w), s.param(self.b));
        s.graph.linear(x, w, Some(b))
    }
}

/// `conv2d(k, same padding) → ReLU → 2×2 max-pool`.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub w: ParamId,
    pub b: ParamId,
    pub kernel: usize,
}

impl ConvBlock {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = cin * kernel * kernel;
        let w = store.add(format!("{name}.weight"), uniform(rng, &[cout, cin, kernel, kernel], he_bound(fan_in)));
        let b = store.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { w, b, kernel }
    }

    pub fn forward<S: Scalar>(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let (w, b) = (s.param(self.w), s.param(self.b));
        let y = s.graph.conv2d(x, w, b, (self.kernel - 1) / 2)?;
        let y = s.graph.relu(y);
        s.graph.maxpool2d(y)
    }
}

/// Transposed convolution doubling the spatial size (k=5, stride 2, pad 2,
/// output padding 1), optionally followed by ReLU.
#[derive(Debug, Clone)]
pub struct UpBlock {
    pub w: ParamId,
    pub b: ParamId,
    pub relu: bool,
}

pub const UP_KERNEL: usize = 5;

impl UpBlock {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cin: usize,
        cout: usize,
        relu: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        // Each output pixel receives about cin·k²/stride² contributions.
        let fan_in = cin * UP_KERNEL * UP_KERNEL / 4;
        let bound = if relu { he_bound(fan_in) } else { he_bound(fan_in) * OUTPUT_INIT_SCALE };
        let w = store.add(format!("{name}.weight"), uniform(rng, &[cin, cout, UP_KERNEL, UP_KERNEL], bound));
        let b = store.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { w, b, relu }
    }

    pub fn forward<S: Scalar>(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let (w, b) = (s.param(self.w), s.param(self.b));
        let y = s.graph.conv_transpose2d(x, w, b, 2, (UP_KERNEL - 1) / 2, 1)?;
        Ok(if self.relu { s.graph.relu(y) } else { y })
    }
}

/// Plain 1-D convolution (used with `k = 1` for channel mixing).
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
}

impl Conv1d {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self::scaled(store, name, cin, cout, kernel, 1.0, rng)
    }

    /// A linear output head (see [`OUTPUT_INIT_SCALE`]).
    pub fn output<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cin: usize,
        cout: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self::scaled(store, name, cin, cout, 1, OUTPUT_INIT_SCALE, rng)
    }

    fn scaled<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let bound = he_bound(cin * kernel) * scale;
        let w = store.add(format!("{name}.weight"), uniform(rng, &[cout, cin, kernel], bound));
        let b = store.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { w, b }
    }

    pub fn forward<S: Scalar>(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let (w, b) = (s.param(self.w), s.param(self.b));
        s.graph.conv1d(x, w, b, 1, Causality::Causal)
    }
}

/// Weight-normalized dilated convolution.
#[derive(Debug, Clone)]
pub struct WnConv1d {
    pub v: ParamId,
    pub g: ParamId,
    pub b: ParamId,
    pub dilation: usize,
    pub mode: Causality,
}

impl WnConv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        dilation: usize,
        mode: Causality,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let v_init: Tensor<S> = uniform(rng, &[cout, cin, kernel], he_bound(cin * kernel));
        let width = cin * kernel;
        let norms: Vec<S> =
            v_init.data().chunks(width).map(|r| r.iter().map(|&a| a * a).sum::<S>().sqrt()).collect();
        let v = store.add(format!("{name}.weight_v"), v_init);
        let g = store.add(format!("{name}.weight_g"), Tensor::new(&[cout], norms).expect("one norm per row"));
        let b = store.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { v, g, b, dilation, mode }
    }

    pub fn forward<S: Scalar>(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let (v, g, b) = (s.param(self.v), s.param(self.g), s.param(self.b));
        let w = s.graph.weight_norm(v, g)?;
        s.graph.conv1d(x, w, b, self.dilation, self.mode)
    }
}

/// Residual TCN block: two `conv → ReLU → dropout` sub-blocks, input added to
/// the output (through a 1×1 conv when channel counts differ), then ReLU.
#[derive(Debug, Clone)]
pub struct TemporalBlock {
    pub conv1: WnConv1d,
    pub conv2: WnConv1d,
    pub skip: Option<Conv1d>,
    pub dropout: f64,
}

impl TemporalBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        dilation: usize,
        mode: Causality,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let conv1 = WnConv1d::new(store, &format!("{name}.conv1"), cin, cout, kernel, dilation, mode, rng);
        let conv2 = WnConv1d::new(store, &format!("{name}.conv2"), cout, cout, kernel, dilation, mode, rng);
        let skip = (cin != cout).then(|| Conv1d::new(store, &format!("{name}.downsample"), cin, cout, 1, rng));
        Self { conv1, conv2, skip, dropout }
    }

    pub fn forward<S: Scalar>(&self, s: &mut Session<'_, S>, x: Var) -> Result<Var> {
        let h = self.conv1.forward(s, x)?;
        let h = s.graph.relu(h);
        let h = s.dropout(h, self.dropout)?;
        let h = self.conv2.forward(s, h)?;
        let h = s.graph.relu(h);
        let h = s.dropout(h, self.dropout)?;
        let res = match &self.skip {
            Some(c) => c.forward(s, x)?,
            None => x,
        };
        let y = s.graph.add(h, res)?;
        Ok(s.graph.relu(y))
    }
}

/// One LSTM cell update; `params` is `[w_ih (4H×D), w_hh (4H×H), bias (4H)]`.
pub fn lstm_step<S: Scalar>(
    g: &mut Graph<S>,
    x: Var,
    h: Var,
    c: Var,
    params: [Var; 3],
    hidden: usize,
) -> Result<(Var, Var)> {
    let [w_ih, w_hh, b] = params;
    let gx = g.linear(x, w_ih, Some(b))?;
    let gh = g.linear(h, w_hh, None)?;
    let gates = g.add(gx, gh)?;
    let i = g.slice_cols(gates, 0, hidden)?;
    let f = g.slice_cols(gates, hidden, hidden)?;
    let cand = g.slice_cols(gates, 2 * hidden, hidden)?;
    let o = g.slice_cols(gates, 3 * hidden, hidden)?;
    let (i, f, o) = (g.sigmoid(i), g.sigmoid(f), g.sigmoid(o));
    let cand = g.tanh(cand);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let squashed = g.tanh(c);
    let h = g.mul(o, squashed)?;
    Ok((h, c))
}

#[derive(Debug, Clone)]
pub struct LstmLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
}

/// Stacked LSTM, gate order (input, forget, cell, output).
#[derive(Debug, Clone)]
pub struct Lstm {
    pub layers: Vec<LstmLayer>,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        name: &str,
        input: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let bound = 1.0 / Float::sqrt(hidden as f64);
        let layers = (0..num_layers)
            .map(|l| {
                let d = if l == 0 { input } else { hidden };
                let w_ih = store.add(format!("{name}.weight_ih_l{l}"), uniform(rng, &[4 * hidden, d], bound));
                let w_hh = store.add(format!("{name}.weight_hh_l{l}"), uniform(rng, &[4 * hidden, hidden], bound));
                let bias = Tensor::from_fn(&[4 * hidden], |i| if (hidden..2 * hidden).contains(&i) { S::one() } else { S::zero() });
                let b = store.add(format!("{name}.bias_l{l}"), bias);
                LstmLayer { w_ih, w_hh, b }
            })
            .collect();
        Self { layers, hidden }
    }

    /// Runs the stack over per-step inputs (each `N×D`), returning the top
    /// layer's per-step hidden states (each `N×H`).
    pub fn forward_steps<S: Scalar>(&self, s: &mut Session<'_, S>, steps: &[Var]) -> Result<Vec<Var>> {
        let first = *steps.first().ok_or(crate::Error::EmptySequence)?;
        let n = s.graph.shape(first)[0];
        let hsz = self.hidden;
        let mut inputs = steps.to_vec();
        for layer in &self.layers {
            let (w_ih, w_hh, b) = (s.param(layer.w_ih), s.param(layer.w_hh), s.param(layer.b));
            let mut h = s.input(Tensor::zeros(&[n, hsz]));
            let mut c = s.input(Tensor::zeros(&[n, hsz]));
            let mut outs = Vec::with_capacity(inputs.len());
            for &x in &inputs {
                (h, c) = lstm_step(&mut s.graph, x, h, c, [w_ih, w_hh, b], hsz)?;
                outs.push(h);
            }
            inputs = outs;
        }
        Ok(inputs)
    }

    /// `N×T×D` sequence in, `N×T×H` outputs out.
    pub fn forward<S: Scalar>(&self, s: &mut Session<'_, S>, seq: Var) -> Result<Var> {
        let shape = s.graph.shape(seq).to_vec();
        if shape.len() != 3 {
            return Err(crate::error::shape_err!("LSTM input must be N×T×D, got {:?}", shape));
        }
        if shape[1] == 0 {
            return Err(crate::Error::EmptySequence);
        }
        let steps = (0..shape[1]).map(|t| s.graph.select_step(seq, t)).collect::<Result<Vec<_>>>()?;
        let outs = self.forward_steps(s, &steps)?;
        s.graph.stack_steps(&outs)
    }
}
