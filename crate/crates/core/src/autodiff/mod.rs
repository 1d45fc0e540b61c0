//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation of one forward pass. Values are
//! computed eagerly; [`Graph::backward`] walks the tape in reverse creation
//! order, which is a valid reverse topological order because an op can only
//! consume nodes that already exist.

mod kernels;
mod params;

pub mod gradcheck;

pub use params::{Adam, ParamId, ParamStore, Parameter, Session};

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, shape_err, Result};
use crate::scalar::{matmul, Scalar};
use crate::tensor::Tensor;
use kernels::{add_row_sums, col2im, col2im_1d, im2col, im2col_1d, project, Patch1d, Patch2d};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Padding mode of a dilated 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Causality {
    /// Left-padded: output `t` sees inputs `<= t`.
    Causal,
    /// Right-padded mirror image, the transpose of a causal convolution.
    AntiCausal,
}

const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Reshape(Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Conv2d { x: Var, w: Var, b: Var, pad: usize },
    ConvTranspose2d { x: Var, w: Var, b: Var, stride: usize, pad: usize },
    MaxPool2d { x: Var, argmax: Vec<usize> },
    Conv1d { x: Var, w: Var, b: Var, dilation: usize, pad_left: usize },
    WeightNorm { v: Var, g: Var },
    Dropout { x: Var, mask: Vec<S> },
    SliceCols { x: Var, start: usize },
    SelectStep { x: Var, step: usize },
    StackSteps(Vec<Var>),
    MeanTime(Var),
    CrossEntropy { logits: Var, labels: Vec<usize>, weights: Vec<S> },
    Mse { pred: Var, target: Var },
}

/// Recorded forward pass.
#[derive(Debug, Clone)]
pub struct Graph<S> {
    values: Vec<Tensor<S>>,
    grads: Vec<Option<Vec<S>>>,
    tracked: Vec<bool>,
    ops: Vec<Op<S>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { values: Vec::new(), grads: Vec::new(), tracked: Vec::new(), ops: Vec::new() }
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, tracked: bool) -> Var {
        self.values.push(value);
        self.grads.push(None);
        self.tracked.push(tracked);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    fn any_tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.tracked[v.0])
    }

    /// Constant input; no gradient is accumulated for it.
    pub fn input(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.values[v.0]
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.values[v.0].shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[S]> {
        self.grads[v.0].as_deref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<S>> {
        self.grads[v.0].take()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn unary(&mut self, x: Var, op: Op<S>, f: impl Fn(S) -> S) -> Var {
        let src = &self.values[x.0];
        let out = Tensor::new(src.shape(), src.data().iter().map(|&v| f(v)).collect()).expect("same shape");
        let t = self.tracked[x.0];
        self.push(out, op, t)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |v| if v > S::zero() { v } else { S::zero() })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<S>, f: impl Fn(S, S) -> S) -> Result<Var> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.shape() != vb.shape() {
            return Err(shape_err!("elementwise op on {:?} and {:?}", va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape(), data)?;
        let t = self.any_tracked(&[a, b]);
        Ok(self.push(out, op, t))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.values[x.0].clone().reshape(shape)?;
        let t = self.tracked[x.0];
        Ok(self.push(out, Op::Reshape(x), t))
    }

    /// `x (N×I) · wᵀ (I×O) + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(shape_err!("linear: input {:?}, weight {:?}", xs, ws));
        }
        let (n, i, o) = (xs[0], xs[1], ws[0]);
        if let Some(b) = b {
            if self.shape(b) != [o] {
                return Err(shape_err!("linear: bias {:?}, want [{}]", self.shape(b), o));
            }
        }
        let mut out = vec![S::zero(); n * o];
        matmul(n, i, o, self.values[x.0].data(), false, self.values[w.0].data(), true, &mut out, false);
        if let Some(b) = b {
            let bd = self.values[b.0].data();
            for row in out.chunks_mut(o) {
                row.iter_mut().zip(bd).for_each(|(v, bv)| *v = *v + *bv);
            }
        }
        let mut deps = vec![x, w];
        deps.extend(b);
        let t = self.any_tracked(&deps);
        Ok(self.push(Tensor::new(&[n, o], out)?, Op::Linear { x, w, b }, t))
    }

    fn check_bias(&self, b: Var, n: usize, what: &str) -> Result<()> {
        if self.shape(b) != [n] {
            return Err(shape_err!("{}: bias {:?}, want [{}]", what, self.shape(b), n));
        }
        Ok(())
    }

    /// Stride-1 2-D cross-correlation with symmetric zero padding.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || ws[2] != ws[3] {
            return Err(shape_err!("conv2d: input {:?}, kernel {:?}", xs, ws));
        }
        if xs[1] != ws[1] {
            return Err(shape_err!("conv2d: input has {} channels, kernel expects {}", xs[1], ws[1]));
        }
        self.check_bias(b, ws[0], "conv2d")?;
        let (n, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, k) = (ws[0], ws[2]);
        if h + 2 * pad < k || wd + 2 * pad < k {
            return Err(shape_err!("conv2d: kernel {} larger than padded input {}x{}", k, h, wd));
        }
        let g = Patch2d {
            channels: cin,
            height: h,
            width: wd,
            kernel: k,
            stride: 1,
            pad,
            out_h: h + 2 * pad - k + 1,
            out_w: wd + 2 * pad - k + 1,
        };
        let (rows, p) = (g.rows(), g.cols());
        let mut col = vec![S::zero(); rows * p];
        let mut out = vec![S::zero(); n * cout * p];
        let (xv, wv, bv) = (self.values[x.0].data(), self.values[w.0].data(), self.values[b.0].data());
        for s in 0..n {
            im2col(&xv[s * cin * h * wd..(s + 1) * cin * h * wd], &g, &mut col);
            project(wv, &col, Some(bv), cout, rows, p, &mut out[s * cout * p..(s + 1) * cout * p]);
        }
        let t = self.any_tracked(&[x, w, b]);
        Ok(self.push(Tensor::new(&[n, cout, g.out_h, g.out_w], out)?, Op::Conv2d { x, w, b, pad }, t))
    }

    /// Transposed 2-D convolution. Kernel layout is `Cin×Cout×k×k`; the output
    /// side is `(H−1)·stride − 2·pad + k + output_pad`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || ws[2] != ws[3] || xs[1] != ws[0] {
            return Err(shape_err!("conv_transpose2d: input {:?}, kernel {:?}", xs, ws));
        }
        if stride == 0 || (output_pad > 0 && output_pad >= stride) {
            return Err(invalid!("conv_transpose2d: output_pad {} must be < stride {}", output_pad, stride));
        }
        self.check_bias(b, ws[1], "conv_transpose2d")?;
        let (n, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, k) = (ws[1], ws[2]);
        let oh = ((h - 1) * stride + k + output_pad).checked_sub(2 * pad);
        let ow = ((wd - 1) * stride + k + output_pad).checked_sub(2 * pad);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(shape_err!("conv_transpose2d: padding {} too large", pad));
        };
        // Patch geometry of the *output* image, whose patch grid is the input grid.
        let g = Patch2d { channels: cout, height: oh, width: ow, kernel: k, stride, pad, out_h: h, out_w: wd };
        let (rows, p) = (g.rows(), g.cols());
        let mut cols = vec![S::zero(); rows * p];
        let mut out = vec![S::zero(); n * cout * oh * ow];
        let (xv, wv, bv) = (self.values[x.0].data(), self.values[w.0].data(), self.values[b.0].data());
        for s in 0..n {
            matmul(rows, cin, p, wv, true, &xv[s * cin * p..(s + 1) * cin * p], false, &mut cols, false);
            let dst = &mut out[s * cout * oh * ow..(s + 1) * cout * oh * ow];
            col2im(&cols, &g, dst);
            for (c, bc) in bv.iter().enumerate() {
                dst[c * oh * ow..(c + 1) * oh * ow].iter_mut().for_each(|v| *v = *v + *bc);
            }
        }
        let t = self.any_tracked(&[x, w, b]);
        Ok(self.push(Tensor::new(&[n, cout, oh, ow], out)?, Op::ConvTranspose2d { x, w, b, stride, pad }, t))
    }

    /// 2×2 max pooling with stride 2. Ties route to the first element in
    /// row-major order.
    pub fn maxpool2d(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || xs[2] % 2 != 0 || xs[3] % 2 != 0 {
            return Err(shape_err!("maxpool2d needs N×C×H×W with even H, W; got {:?}", xs));
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (oh, ow) = (h / 2, w / 2);
        let src = self.values[x.0].data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    out.push(src[best]);
                    argmax.push(best);
                }
            }
        }
        let t = self.tracked[x.0];
        Ok(self.push(Tensor::new(&[n, c, oh, ow], out)?, Op::MaxPool2d { x, argmax }, t))
    }

    /// Dilated 1-D cross-correlation over `N×Cin×L`; kernel `Cout×Cin×k`.
    /// Padding of `(k−1)·dilation` on one side keeps the length unchanged.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize, mode: Causality) -> Result<Var> {
        if dilation < 1 {
            return Err(invalid!("conv1d: dilation must be >= 1"));
        }
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 {
            return Err(shape_err!("conv1d: input {:?}, kernel {:?}", xs, ws));
        }
        if xs[1] != ws[1] {
            return Err(shape_err!("conv1d: input has {} channels, kernel expects {}", xs[1], ws[1]));
        }
        self.check_bias(b, ws[0], "conv1d")?;
        let (n, cin, len) = (xs[0], xs[1], xs[2]);
        let (cout, k) = (ws[0], ws[2]);
        let span = (k - 1) * dilation;
        let pad_left = match mode {
            Causality::Causal => span,
            Causality::AntiCausal => 0,
        };
        let g = Patch1d { channels: cin, len, kernel: k, dilation, pad_left, out_len: len };
        let rows = g.rows();
        let mut col = vec![S::zero(); rows * len];
        let mut out = vec![S::zero(); n * cout * len];
        let (xv, wv, bv) = (self.values[x.0].data(), self.values[w.0].data(), self.values[b.0].data());
        for s in 0..n {
            im2col_1d(&xv[s * cin * len..(s + 1) * cin * len], &g, &mut col);
            project(wv, &col, Some(bv), cout, rows, len, &mut out[s * cout * len..(s + 1) * cout * len]);
        }
        let t = self.any_tracked(&[x, w, b]);
        Ok(self.push(Tensor::new(&[n, cout, len], out)?, Op::Conv1d { x, w, b, dilation, pad_left }, t))
    }

    /// Weight normalization: row `o` of the result is `g[o] · v[o] / ‖v[o]‖`,
    /// rows taken along the leading (output-channel) axis.
    pub fn weight_norm(&mut self, v: Var, g: Var) -> Result<Var> {
        let vs = self.shape(v).to_vec();
        if vs.is_empty() || self.shape(g) != [vs[0]] {
            return Err(shape_err!("weight_norm: direction {:?}, magnitude {:?}", vs, self.shape(g)));
        }
        let rows = vs[0];
        let width = self.values[v.0].len() / rows.max(1);
        let (vv, gv) = (self.values[v.0].data(), self.values[g.0].data());
        let mut out = Vec::with_capacity(vv.len());
        for o in 0..rows {
            let row = &vv[o * width..(o + 1) * width];
            let norm = row.iter().map(|&a| a * a).sum::<S>().sqrt().max(S::of(NORM_EPS));
            let scale = gv[o] / norm;
            out.extend(row.iter().map(|&a| a * scale));
        }
        let t = self.any_tracked(&[v, g]);
        Ok(self.push(Tensor::new(&vs, out)?, Op::WeightNorm { v, g }, t))
    }

    /// Inverted dropout: kept activations are scaled by `1/(1−p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(invalid!("dropout probability {} outside [0, 1)", p));
        }
        let keep = S::of(1.0 / (1.0 - p));
        let mask: Vec<S> =
            (0..self.values[x.0].len()).map(|_| if rng.gen::<f64>() >= p { keep } else { S::zero() }).collect();
        let src = &self.values[x.0];
        let out = Tensor::new(src.shape(), src.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect())?;
        let t = self.tracked[x.0];
        Ok(self.push(out, Op::Dropout { x, mask }, t))
    }

    /// Columns `start..start+len` of an `N×D` matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 2 || start + len > xs[1] {
            return Err(shape_err!("slice_cols {}..{} of {:?}", start, start + len, xs));
        }
        let (n, d) = (xs[0], xs[1]);
        let src = self.values[x.0].data();
        let mut out = Vec::with_capacity(n * len);
        for r in 0..n {
            out.extend_from_slice(&src[r * d + start..r * d + start + len]);
        }
        let t = self.tracked[x.0];
        Ok(self.push(Tensor::new(&[n, len], out)?, Op::SliceCols { x, start }, t))
    }

    /// Step `step` of an `N×T×D` sequence, as `N×D`.
    pub fn select_step(&mut self, x: Var, step: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || step >= xs[1] {
            return Err(shape_err!("select_step {} of {:?}", step, xs));
        }
        let (n, steps, d) = (xs[0], xs[1], xs[2]);
        let src = self.values[x.0].data();
        let mut out = Vec::with_capacity(n * d);
        for r in 0..n {
            let at = (r * steps + step) * d;
            out.extend_from_slice(&src[at..at + d]);
        }
        let t = self.tracked[x.0];
        Ok(self.push(Tensor::new(&[n, d], out)?, Op::SelectStep { x, step }, t))
    }

    /// Stacks `T` matrices of shape `N×D` into an `N×T×D` sequence.
    pub fn stack_steps(&mut self, steps: &[Var]) -> Result<Var> {
        let first = *steps.first().ok_or(crate::Error::EmptySequence)?;
        let fs = self.shape(first).to_vec();
        if fs.len() != 2 || steps.iter().any(|s| self.shape(*s) != fs.as_slice()) {
            return Err(shape_err!("stack_steps: inconsistent step shapes"));
        }
        let (n, d, t_len) = (fs[0], fs[1], steps.len());
        let mut out = vec![S::zero(); n * t_len * d];
        for (t, s) in steps.iter().enumerate() {
            let src = self.values[s.0].data();
            for r in 0..n {
                out[(r * t_len + t) * d..(r * t_len + t + 1) * d].copy_from_slice(&src[r * d..(r + 1) * d]);
            }
        }
        let tracked = self.any_tracked(steps);
        Ok(self.push(Tensor::new(&[n, t_len, d], out)?, Op::StackSteps(steps.to_vec()), tracked))
    }

    /// Average over the trailing (time) axis of `N×C×L`.
    pub fn mean_time(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || xs[2] == 0 {
            return Err(shape_err!("mean_time needs non-empty N×C×L; got {:?}", xs));
        }
        let len = xs[2];
        let inv = S::one() / S::of(len as f64);
        let out: Vec<S> = self.values[x.0].data().chunks(len).map(|c| c.iter().copied().sum::<S>() * inv).collect();
        let t = self.tracked[x.0];
        Ok(self.push(Tensor::new(&[xs[0], xs[1]], out)?, Op::MeanTime(x), t))
    }

    /// Mean over the batch of `weights[y]·(−log softmax(logits)[y])`.
    pub fn weighted_cross_entropy(&mut self, logits: Var, labels: &[usize], weights: &[S]) -> Result<Var> {
        let ls = self.shape(logits).to_vec();
        if ls.len() != 2 || ls[0] != labels.len() || ls[1] != weights.len() {
            return Err(shape_err!(
                "cross-entropy: logits {:?}, {} labels, {} weights",
                ls,
                labels.len(),
                weights.len()
            ));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= ls[1]) {
            return Err(invalid!("label {} outside 0..{}", bad, ls[1]));
        }
        if weights.iter().any(|w| !(*w > S::zero())) {
            return Err(invalid!("class weights must be positive"));
        }
        let (n, k) = (ls[0], ls[1]);
        let z = self.values[logits.0].data();
        let mut total = S::zero();
        for (r, &y) in labels.iter().enumerate() {
            let row = &z[r * k..(r + 1) * k];
            let m = row.iter().copied().fold(S::neg_infinity(), S::max);
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<S>().ln();
            total = total + weights[y] * (lse - row[y]);
        }
        let loss = total / S::of(n.max(1) as f64);
        let t = self.tracked[logits.0];
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, labels: labels.to_vec(), weights: weights.to_vec() },
            t,
        ))
    }

    /// Mean squared elementwise difference.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, q) = (&self.values[pred.0], &self.values[target.0]);
        if p.shape() != q.shape() {
            return Err(shape_err!("mse: {:?} vs {:?}", p.shape(), q.shape()));
        }
        let sum: S = p.data().iter().zip(q.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let loss = sum / S::of(p.len().max(1) as f64);
        let t = self.any_tracked(&[pred, target]);
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target }, t))
    }

    fn accumulate(&mut self, v: Var, contribution: &[S]) {
        if !self.tracked[v.0] {
            return;
        }
        match &mut self.grads[v.0] {
            Some(g) => g.iter_mut().zip(contribution).for_each(|(a, b)| *a = *a + *b),
            slot @ None => *slot = Some(contribution.to_vec()),
        }
    }

    /// Gradient buffer of `v`, allocated on first use; `None` when untracked.
    fn grad_slot<'g>(grads: &'g mut [Option<Vec<S>>], tracked: &[bool], v: Var, len: usize) -> Option<&'g mut Vec<S>> {
        if !tracked[v.0] {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| vec![S::zero(); len]))
    }

    /// Back-propagates from a scalar `loss`, seeding its gradient with one.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.values[loss.0].len() != 1 {
            return Err(shape_err!("backward needs a scalar loss, got {:?}", self.shape(loss)));
        }
        self.grads[loss.0] = Some(vec![S::one()]);
        for i in (0..=loss.0).rev() {
            if !self.tracked[i] {
                continue;
            }
            let Some(gy) = self.grads[i].take() else { continue };
            let op = core::mem::replace(&mut self.ops[i], Op::Leaf);
            self.backprop_node(i, &op, &gy);
            self.ops[i] = op;
            self.grads[i] = Some(gy);
        }
        Ok(())
    }

    fn backprop_node(&mut self, i: usize, op: &Op<S>, gy: &[S]) {
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(*a, gy);
                self.accumulate(*b, gy);
            }
            Op::Mul(a, b) => {
                let ga: Vec<S> = gy.iter().zip(self.values[b.0].data()).map(|(&g, &v)| g * v).collect();
                let gb: Vec<S> = gy.iter().zip(self.values[a.0].data()).map(|(&g, &v)| g * v).collect();
                self.accumulate(*a, &ga);
                self.accumulate(*b, &gb);
            }
            Op::Relu(x) => {
                let gx: Vec<S> = gy
                    .iter()
                    .zip(self.values[x.0].data())
                    .map(|(&g, &v)| if v > S::zero() { g } else { S::zero() })
                    .collect();
                self.accumulate(*x, &gx);
            }
            Op::Sigmoid(x) => {
                let gx: Vec<S> =
                    gy.iter().zip(self.values[i].data()).map(|(&g, &y)| g * y * (S::one() - y)).collect();
                self.accumulate(*x, &gx);
            }
            Op::Tanh(x) => {
                let gx: Vec<S> =
                    gy.iter().zip(self.values[i].data()).map(|(&g, &y)| g * (S::one() - y * y)).collect();
                self.accumulate(*x, &gx);
            }
            Op::Reshape(x) => self.accumulate(*x, gy),
            Op::Linear { x, w, b } => {
                let (n, inp) = (self.shape(*x)[0], self.shape(*x)[1]);
                let out = self.shape(*w)[0];
                let (grads, tracked, values) = (&mut self.grads, &self.tracked, &self.values);
                if let Some(gx) = Self::grad_slot(grads, tracked, *x, n * inp) {
                    matmul(n, out, inp, gy, false, values[w.0].data(), false, gx, true);
                }
                if let Some(gw) = Self::grad_slot(grads, tracked, *w, out * inp) {
                    matmul(out, n, inp, gy, true, values[x.0].data(), false, gw, true);
                }
                if let Some(b) = b {
                    if let Some(gb) = Self::grad_slot(grads, tracked, *b, out) {
                        for row in gy.chunks(out) {
                            gb.iter_mut().zip(row).for_each(|(a, r)| *a = *a + *r);
                        }
                    }
                }
            }
            Op::Conv2d { x, w, b, pad } => self.backprop_conv2d(*x, *w, *b, *pad, i, gy),
            Op::ConvTranspose2d { x, w, b, stride, pad } => {
                self.backprop_conv_transpose2d(*x, *w, *b, *stride, *pad, i, gy)
            }
            Op::MaxPool2d { x, argmax } => {
                let len = self.values[x.0].len();
                if let Some(gx) = Self::grad_slot(&mut self.grads, &self.tracked, *x, len) {
                    for (&idx, &g) in argmax.iter().zip(gy) {
                        gx[idx] = gx[idx] + g;
                    }
                }
            }
            Op::Conv1d { x, w, b, dilation, pad_left } => {
                self.backprop_conv1d(*x, *w, *b, *dilation, *pad_left, gy)
            }
            Op::WeightNorm { v, g } => {
                let vs = self.shape(*v).to_vec();
                let rows = vs[0];
                let width = self.values[v.0].len() / rows.max(1);
                let mut gv = vec![S::zero(); rows * width];
                let mut gg = vec![S::zero(); rows];
                let (vv, magn) = (self.values[v.0].data(), self.values[g.0].data());
                for o in 0..rows {
                    let row = &vv[o * width..(o + 1) * width];
                    let dw = &gy[o * width..(o + 1) * width];
                    let raw = row.iter().map(|&a| a * a).sum::<S>().sqrt();
                    let floored = raw < S::of(NORM_EPS);
                    let norm = raw.max(S::of(NORM_EPS));
                    let proj: S = dw.iter().zip(row).map(|(&d, &a)| d * a).sum::<S>() / norm;
                    gg[o] = proj;
                    let scale = magn[o] / norm;
                    for j in 0..width {
                        let radial = if floored { S::zero() } else { row[j] / norm * proj };
                        gv[o * width + j] = scale * (dw[j] - radial);
                    }
                }
                self.accumulate(*v, &gv);
                self.accumulate(*g, &gg);
            }
            Op::Dropout { x, mask } => {
                let gx: Vec<S> = gy.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                self.accumulate(*x, &gx);
            }
            Op::SliceCols { x, start } => {
                let (n, d) = (self.shape(*x)[0], self.shape(*x)[1]);
                let len = gy.len() / n.max(1);
                if let Some(gx) = Self::grad_slot(&mut self.grads, &self.tracked, *x, n * d) {
                    for r in 0..n {
                        let dst = &mut gx[r * d + start..r * d + start + len];
                        dst.iter_mut().zip(&gy[r * len..(r + 1) * len]).for_each(|(a, b)| *a = *a + *b);
                    }
                }
            }
            Op::SelectStep { x, step } => {
                let xs = self.shape(*x).to_vec();
                let (n, steps, d) = (xs[0], xs[1], xs[2]);
                if let Some(gx) = Self::grad_slot(&mut self.grads, &self.tracked, *x, n * steps * d) {
                    for r in 0..n {
                        let at = (r * steps + step) * d;
                        gx[at..at + d].iter_mut().zip(&gy[r * d..(r + 1) * d]).for_each(|(a, b)| *a = *a + *b);
                    }
                }
            }
            Op::StackSteps(steps) => {
                let ys = self.shape(Var(i)).to_vec();
                let (n, t_len, d) = (ys[0], ys[1], ys[2]);
                for (t, s) in steps.iter().enumerate() {
                    let mut gs = vec![S::zero(); n * d];
                    for r in 0..n {
                        gs[r * d..(r + 1) * d].copy_from_slice(&gy[(r * t_len + t) * d..(r * t_len + t + 1) * d]);
                    }
                    self.accumulate(*s, &gs);
                }
            }
            Op::MeanTime(x) => {
                let len = self.shape(*x)[2];
                let inv = S::one() / S::of(len as f64);
                let gx: Vec<S> = gy.iter().flat_map(|&g| core::iter::repeat(g * inv).take(len)).collect();
                self.accumulate(*x, &gx);
            }
            Op::CrossEntropy { logits, labels, weights } => {
                let k = weights.len();
                let n = labels.len();
                let scale = gy[0] / S::of(n.max(1) as f64);
                let z = self.values[logits.0].data();
                let mut gz = vec![S::zero(); z.len()];
                for (r, &y) in labels.iter().enumerate() {
                    let row = &z[r * k..(r + 1) * k];
                    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
                    let denom: S = row.iter().map(|&v| (v - m).exp()).sum();
                    let wy = weights[y] * scale;
                    for c in 0..k {
                        let p = (row[c] - m).exp() / denom;
                        let onehot = if c == y { S::one() } else { S::zero() };
                        gz[r * k + c] = wy * (p - onehot);
                    }
                }
                self.accumulate(*logits, &gz);
            }
            Op::Mse { pred, target } => {
                let (p, q) = (self.values[pred.0].data(), self.values[target.0].data());
                let scale = gy[0] * S::of(2.0) / S::of(p.len().max(1) as f64);
                let gp: Vec<S> = p.iter().zip(q).map(|(&a, &b)| (a - b) * scale).collect();
                let gq: Vec<S> = gp.iter().map(|&v| -v).collect();
                self.accumulate(*pred, &gp);
                self.accumulate(*target, &gq);
            }
        }
    }

    fn backprop_conv2d(&mut self, x: Var, w: Var, b: Var, pad: usize, y: usize, gy: &[S]) {
        let (xs, ws, ys) = (self.shape(x).to_vec(), self.shape(w).to_vec(), self.shape(Var(y)).to_vec());
        let (n, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, k) = (ws[0], ws[2]);
        let g = Patch2d { channels: cin, height: h, width: wd, kernel: k, stride: 1, pad, out_h: ys[2], out_w: ys[3] };
        let (rows, p) = (g.rows(), g.cols());
        let (grads, tracked, values) = (&mut self.grads, &self.tracked, &self.values);
        let xv = values[x.0].data();
        let wv = values[w.0].data();
        let mut col = vec![S::zero(); rows * p];
        if let Some(gb) = Self::grad_slot(grads, tracked, b, cout) {
            for s in 0..n {
                add_row_sums(&gy[s * cout * p..(s + 1) * cout * p], cout, p, gb);
            }
        }
        if tracked[w.0] {
            let gw = Self::grad_slot(grads, tracked, w, wv.len()).expect("tracked");
            for s in 0..n {
                im2col(&xv[s * cin * h * wd..(s + 1) * cin * h * wd], &g, &mut col);
                matmul(cout, p, rows, &gy[s * cout * p..(s + 1) * cout * p], false, &col, true, gw, true);
            }
        }
        if let Some(gx) = Self::grad_slot(grads, tracked, x, xv.len()) {
            for s in 0..n {
                matmul(rows, cout, p, wv, true, &gy[s * cout * p..(s + 1) * cout * p], false, &mut col, false);
                col2im(&col, &g, &mut gx[s * cin * h * wd..(s + 1) * cin * h * wd]);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn backprop_conv_transpose2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize, y: usize, gy: &[S]) {
        let (xs, ws, ys) = (self.shape(x).to_vec(), self.shape(w).to_vec(), self.shape(Var(y)).to_vec());
        let (n, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, k) = (ws[1], ws[2]);
        let (oh, ow) = (ys[2], ys[3]);
        let g = Patch2d { channels: cout, height: oh, width: ow, kernel: k, stride, pad, out_h: h, out_w: wd };
        let (rows, p) = (g.rows(), g.cols());
        let (grads, tracked, values) = (&mut self.grads, &self.tracked, &self.values);
        let xv = values[x.0].data();
        let wv = values[w.0].data();
        if let Some(gb) = Self::grad_slot(grads, tracked, b, cout) {
            for s in 0..n {
                add_row_sums(&gy[s * cout * oh * ow..(s + 1) * cout * oh * ow], cout, oh * ow, gb);
            }
        }
        let need_w = tracked[w.0];
        let need_x = tracked[x.0];
        if !need_w && !need_x {
            return;
        }
        let mut cols = vec![S::zero(); rows * p];
        for s in 0..n {
            im2col(&gy[s * cout * oh * ow..(s + 1) * cout * oh * ow], &g, &mut cols);
            if need_w {
                let gw = Self::grad_slot(grads, tracked, w, wv.len()).expect("tracked");
                matmul(cin, p, rows, &xv[s * cin * p..(s + 1) * cin * p], false, &cols, true, gw, true);
            }
            if need_x {
                let gx = Self::grad_slot(grads, tracked, x, xv.len()).expect("tracked");
                matmul(cin, rows, p, wv, false, &cols, false, &mut gx[s * cin * p..(s + 1) * cin * p], true);
            }
        }
    }

    fn backprop_conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize, pad_left: usize, gy: &[S]) {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        let (n, cin, len) = (xs[0], xs[1], xs[2]);
        let (cout, k) = (ws[0], ws[2]);
        let g = Patch1d { channels: cin, len, kernel: k, dilation, pad_left, out_len: len };
        let rows = g.rows();
        let (grads, tracked, values) = (&mut self.grads, &self.tracked, &self.values);
        let xv = values[x.0].data();
        let wv = values[w.0].data();
        if let Some(gb) = Self::grad_slot(grads, tracked, b, cout) {
            for s in 0..n {
                add_row_sums(&gy[s * cout * len..(s + 1) * cout * len], cout, len, gb);
            }
        }
        let mut col = vec![S::zero(); rows * len];
        if tracked[w.0] {
            let gw = Self::grad_slot(grads, tracked, w, wv.len()).expect("tracked");
            for s in 0..n {
                im2col_1d(&xv[s * cin * len..(s + 1) * cin * len], &g, &mut col);
                matmul(cout, len, rows, &gy[s * cout * len..(s + 1) * cout * len], false, &col, true, gw, true);
            }
        }
        if let Some(gx) = Self::grad_slot(grads, tracked, x, xv.len()) {
            for s in 0..n {
                matmul(rows, cout, len, wv, true, &gy[s * cout * len..(s + 1) * cout * len], false, &mut col, false);
                col2im_1d(&col, &g, &mut gx[s * cin * len..(s + 1) * cin * len]);
            }
        }
    }
}
