//! Training loops, scoring, metrics and the hyperparameter search.

pub mod metrics;
pub mod search;

pub use metrics::{roc_pr_curves, EvalResult};
pub use search::{
    fit_and_test, grid_cells, grid_search, mean_fold_auc, partition_for, run_cv, select_cell, train_and_score, Cell, CellResult, CvResult,
    Executor, FoldOutcome, FoldResult,
    GridResult, InputOptions, PipelineConfig, Sequential, TestResult, FIXED_CELL, GRID_PPL_S, GRID_WINDOWS_S,
};

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::autodiff::{Adam, Session};
use crate::error::{invalid, Error, Result};
use crate::models::{ArchConfig, ArchTag, Model, Preprocessor};
use crate::rng::{derive_seed, rng_for, shuffle};
use crate::segmentation::{Label, LabeledWindow};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Supervised,
    Unsupervised,
}

impl Mode {
    pub fn of(tag: ArchTag) -> Self {
        if tag.is_autoencoder() {
            Mode::Unsupervised
        } else {
            Mode::Supervised
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Supervised => "supervised",
            Mode::Unsupervised => "unsupervised",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Mode::Supervised),
            "unsupervised" => Ok(Mode::Unsupervised),
            _ => Err(invalid!("unknown mode '{}'", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Optional cap on optimizer steps per epoch (reduced-scale runs).
    pub max_batches_per_epoch: Option<usize>,
}

impl TrainConfig {
    pub fn supervised() -> Self {
        Self { epochs: 100, batch_size: 128, learning_rate: 1e-4, max_batches_per_epoch: None }
    }

    pub fn unsupervised() -> Self {
        Self { epochs: 500, batch_size: 128, learning_rate: 5e-4, max_batches_per_epoch: None }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Supervised => Self::supervised(),
            Mode::Unsupervised => Self::unsupervised(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid!("epochs and batch size must be positive"));
        }
        if self.max_batches_per_epoch == Some(0) {
            return Err(invalid!("batch cap must be positive"));
        }
        Adam::new(self.learning_rate).map(|_| ())
    }
}

/// `w_c = N / (2 · N_c)` for classes (interictal, preictal).
pub fn class_weights(counts: [usize; 2]) -> Result<[f64; 2]> {
    if counts[0] == 0 || counts[1] == 0 {
        return Err(invalid!("training set has a single class (counts {:?})", counts));
    }
    let total = (counts[0] + counts[1]) as f64;
    Ok([total / (2.0 * counts[0] as f64), total / (2.0 * counts[1] as f64)])
}

/// Windows transformed into model samples, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub sample_shape: Vec<usize>,
    pub values: Vec<f32>,
    pub labels: Vec<Label>,
}

impl Prepared {
    pub fn new(pre: &Preprocessor, sample_shape: &[usize], windows: &[&LabeledWindow]) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        let mut values = Vec::with_capacity(per * windows.len());
        for w in windows {
            let s = pre.transform(&w.data)?;
            if s.len() != per {
                return Err(invalid!("transform produced {} values, model expects {}", s.len(), per));
            }
            values.extend(s);
        }
        Ok(Self { sample_shape: sample_shape.to_vec(), values, labels: windows.iter().map(|w| w.label).collect() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn sample(&self, i: usize) -> &[f32] {
        let per: usize = self.sample_shape.iter().product();
        &self.values[i * per..(i + 1) * per]
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let samples: Vec<&[f32]> = indices.iter().map(|&i| self.sample(i)).collect();
        Preprocessor::batch(&samples, &self.sample_shape)
    }

    pub fn counts(&self) -> [usize; 2] {
        let pre = self.labels.iter().filter(|&&l| l == Label::Preictal).count();
        [self.len() - pre, pre]
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    /// Mean training loss of each epoch.
    pub losses: Vec<f64>,
}

enum Objective {
    Classify([f32; 2]),
    Reconstruct,
}

fn fit(arch: ArchConfig, data: &Prepared, tc: &TrainConfig, seed: u64, objective: Objective) -> Result<TrainOutcome> {
    tc.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = Model::<f32>::new(arch, derive_seed(seed, &[0]))?;
    let adam = Adam::new(tc.learning_rate)?;
    let mut order_rng = rng_for(seed, &[1]);
    let mut dropout_rng = rng_for(seed, &[2]);
    let labels: Vec<usize> = data.labels.iter().map(|l| l.class()).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(tc.epochs);
    for _ in 0..tc.epochs {
        shuffle(&mut order, &mut order_rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        let cap = tc.max_batches_per_epoch.unwrap_or(usize::MAX);
        for idx in order.chunks(tc.batch_size).take(cap) {
            let x = data.batch(idx)?;
            let (loss, grads) = {
                let mut s = Session::train(model.store(), &mut dropout_rng);
                let xv = s.input(x);
                let y = model.forward(&mut s, xv)?;
                let l = match &objective {
                    Objective::Classify(w) => {
                        let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                        s.graph.weighted_cross_entropy(y, &ys, w)?
                    }
                    Objective::Reconstruct => {
                        let target = s.input(data.batch(idx)?);
                        s.graph.mse(y, target)?
                    }
                };
                let value = s.graph.value(l).data()[0] as f64;
                (value, s.backward(l)?)
            };
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            adam.step(model.store_mut(), &grads);
            total += loss * idx.len() as f64;
            seen += idx.len();
        }
        losses.push(total / seen as f64);
    }
    Ok(TrainOutcome { model, losses })
}

/// Class-weighted cross-entropy training of a classifier.
pub fn train_supervised(arch: ArchConfig, data: &Prepared, tc: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    if arch.tag.is_autoencoder() {
        return Err(invalid!("{} is not a classifier", arch.tag));
    }
    let w = class_weights(data.counts())?;
    fit(arch, data, tc, seed, Objective::Classify([w[0] as f32, w[1] as f32]))
}

/// Reconstruction training on interictal windows only.
pub fn train_autoencoder(arch: ArchConfig, data: &Prepared, tc: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    if !arch.tag.is_autoencoder() {
        return Err(invalid!("{} is not an autoencoder", arch.tag));
    }
    if let Some(i) = data.labels.iter().position(|&l| l == Label::Preictal) {
        return Err(Error::Leakage(alloc::format!("preictal sample {} in autoencoder training data", i)));
    }
    fit(arch, data, tc, seed, Objective::Reconstruct)
}

/// Eval-mode scores: preictal probability for classifiers, reconstruction
/// error for autoencoders.
pub fn score(model: &Model<f32>, data: &Prepared, batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for idx in all.chunks(batch_size.max(1)) {
        let x = data.batch(idx)?;
        if model.tag().is_autoencoder() {
            out.extend(model.anomaly_scores(&x)?);
        } else {
            out.extend(model.preictal_probabilities(&x)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
