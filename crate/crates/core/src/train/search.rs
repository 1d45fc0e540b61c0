//! Internal cross-validation and the window-size × PPL grid search.
//!
//! Work is split into independent jobs (one per fold) handed to an
//! [`Executor`]; every job draws from its own seed derived from the base
//! seed and its coordinates, so results do not depend on scheduling.

use alloc::vec::Vec;

use super::{metrics::roc_pr_curves, score, train_autoencoder, train_supervised, EvalResult, Prepared, TrainConfig, TrainOutcome};
use crate::error::{invalid, Error, Result};
use crate::models::{ArchTag, InputSpec, Preprocessor};
use crate::recording::PatientTimeline;
use crate::rng::derive_seed;
use crate::segmentation::{cv_folds, extract_windows, label_timeline, loso_partition, Label, LabelParams, LabeledWindow, Partition, TrainingSet};

pub const GRID_WINDOWS_S: [f64; 5] = [5.0, 10.0, 15.0, 30.0, 60.0];
pub const GRID_PPL_S: [f64; 3] = [1800.0, 3600.0, 7200.0];
pub const FIXED_CELL: Cell = Cell { window_s: 30.0, ppl_s: 3600.0 };

const WINDOW_STREAM: u64 = 0x77;
const FINAL_STREAM: u64 = u64::MAX;

/// One (window size, PPL) candidate, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub window_s: f64,
    pub ppl_s: f64,
}

/// The full 5 × 3 grid, window-major.
pub fn grid_cells() -> Vec<Cell> {
    GRID_WINDOWS_S.iter().flat_map(|&w| GRID_PPL_S.iter().map(move |&p| Cell { window_s: w, ppl_s: p })).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputOptions {
    pub image_size: usize,
    pub sub_window_s: f64,
    pub sub_image_size: usize,
    pub downsample: usize,
}

impl Default for InputOptions {
    fn default() -> Self {
        Self { image_size: 128, sub_window_s: 5.0, sub_image_size: 64, downsample: 4 }
    }
}

/// Everything except the data and the seed that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tag: ArchTag,
    pub train: TrainConfig,
    /// Window size and PPL are overridden per cell.
    pub labels: LabelParams,
    pub input: InputOptions,
}

impl PipelineConfig {
    pub fn new(tag: ArchTag) -> Self {
        Self {
            tag,
            train: TrainConfig::for_mode(super::Mode::of(tag)),
            labels: LabelParams::default(),
            input: InputOptions::default(),
        }
    }

    pub fn label_params(&self, cell: Cell) -> LabelParams {
        LabelParams { window_size_s: cell.window_s, ppl_s: cell.ppl_s, ..self.labels }
    }

    pub fn input_spec(&self, cell: Cell, channels: usize, sampling_rate: f64) -> InputSpec {
        let mut spec = InputSpec::new(self.tag.input_kind(), channels, sampling_rate, cell.window_s);
        spec.image_size = self.input.image_size;
        spec.sub_window_s = self.input.sub_window_s;
        spec.sub_image_size = self.input.sub_image_size;
        spec.downsample = self.input.downsample;
        spec
    }
}

/// Runs `count` independent jobs and returns their results in job order.
pub trait Executor: Sync {
    fn map<T: Send>(&self, count: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T>;
}

pub struct Sequential;

impl Executor for Sequential {
    fn map<T: Send>(&self, count: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..count).map(job).collect()
    }
}

/// Labels the timeline for `cell`, cuts windows and holds out the last lead
/// seizure.
pub fn partition_for(timeline: &PatientTimeline, cfg: &PipelineConfig, cell: Cell, seed: u64) -> Result<Partition> {
    let params = cfg.label_params(cell);
    let labeling = label_timeline(timeline, &params)?;
    let windows = extract_windows(timeline, &labeling, &params, derive_seed(seed, &[WINDOW_STREAM]))?;
    loso_partition(windows, labeling.leads.len())
}

/// Trains a fresh model on `train` and scores `eval`. Autoencoders see only
/// the interictal part of `train`.
pub fn train_and_score(
    cfg: &PipelineConfig,
    cell: Cell,
    train: &[&LabeledWindow],
    eval: &[&LabeledWindow],
    sampling_rate: f64,
    seed: u64,
) -> Result<(TrainOutcome, Preprocessor, Vec<f64>)> {
    let channels = train.first().or(eval.first()).map(|w| w.channels).ok_or(Error::EmptyDataset)?;
    let used: Vec<&LabeledWindow> = if cfg.tag.is_autoencoder() {
        train.iter().copied().filter(|w| w.label == Label::Interictal).collect()
    } else {
        train.to_vec()
    };
    let spec = cfg.input_spec(cell, channels, sampling_rate);
    let arch = spec.arch_config(cfg.tag)?;
    let pre = Preprocessor::fit(spec, used.iter().map(|w| w.data.as_slice()))?;
    let shape = arch.sample_shape();
    let data = Prepared::new(&pre, &shape, &used)?;
    let outcome = if cfg.tag.is_autoencoder() {
        train_autoencoder(arch, &data, &cfg.train, seed)?
    } else {
        train_supervised(arch, &data, &cfg.train, seed)?
    };
    let eval_data = Prepared::new(&pre, &shape, eval)?;
    let scores = score(&outcome.model, &eval_data, cfg.train.batch_size)?;
    Ok((outcome, pre, scores))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoldOutcome {
    Scored { auc_roc: f64, auc_pr: f64 },
    /// The fold could not be evaluated; the reason is kept for the report.
    Skipped(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold_seizure: usize,
    pub outcome: FoldOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    /// Mean validation AUC ROC over the scored folds.
    pub mean_auc_roc: f64,
}

fn has_both(windows: &[&LabeledWindow]) -> bool {
    windows.iter().any(|w| w.label == Label::Preictal) && windows.iter().any(|w| w.label == Label::Interictal)
}

/// One model per fold, trained from scratch; the held-out test seizure is not
/// reachable through a [`TrainingSet`].
pub fn run_cv<E: Executor>(
    train: &TrainingSet,
    cfg: &PipelineConfig,
    cell: Cell,
    sampling_rate: f64,
    seed: u64,
    exec: &E,
) -> Result<CvResult> {
    let folds = cv_folds(train)?;
    let windows = train.windows();
    let job = |i: usize| -> Result<FoldResult> {
        let fold = &folds[i];
        let fit: Vec<&LabeledWindow> = fold.train.iter().map(|&k| &windows[k]).collect();
        let val: Vec<&LabeledWindow> = fold.validation.iter().map(|&k| &windows[k]).collect();
        let outcome = if !has_both(&val) {
            FoldOutcome::Skipped("validation fold has a single class")
        } else if !cfg.tag.is_autoencoder() && !has_both(&fit) {
            FoldOutcome::Skipped("training fold has a single class")
        } else {
            let (_, _, scores) =
                train_and_score(cfg, cell, &fit, &val, sampling_rate, derive_seed(seed, &[fold.fold_seizure as u64]))?;
            let labels: Vec<bool> = val.iter().map(|w| w.label == Label::Preictal).collect();
            let r = roc_pr_curves(&scores, &labels)?;
            FoldOutcome::Scored { auc_roc: r.auc_roc, auc_pr: r.auc_pr }
        };
        Ok(FoldResult { fold_seizure: fold.fold_seizure, outcome })
    };
    let folds = exec.map(folds.len(), &job).into_iter().collect::<Result<Vec<_>>>()?;
    let mean_auc_roc = mean_fold_auc(&folds)?;
    Ok(CvResult { folds, mean_auc_roc })
}

/// Mean AUC ROC of the scored folds; skipped folds do not count.
pub fn mean_fold_auc(folds: &[FoldResult]) -> Result<f64> {
    let aucs: Vec<f64> = folds
        .iter()
        .filter_map(|f| match f.outcome {
            FoldOutcome::Scored { auc_roc, .. } => Some(auc_roc),
            FoldOutcome::Skipped(_) => None,
        })
        .collect();
    if aucs.is_empty() {
        return Err(Error::AllFoldsSkipped);
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Final model of a run and its held-out test evaluation.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub cell: Cell,
    pub held_out_seizure: usize,
    pub eval: EvalResult,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    /// Start time (s) of each test window.
    pub starts_s: Vec<f64>,
    pub train: TrainOutcome,
    pub preprocessor: Preprocessor,
}

/// Trains on the whole training partition of `cell` and evaluates on the
/// held-out seizure.
pub fn fit_and_test(timeline: &PatientTimeline, cfg: &PipelineConfig, cell: Cell, seed: u64) -> Result<TestResult> {
    let part = partition_for(timeline, cfg, cell, seed)?;
    part.train.check_sealed()?;
    let fit: Vec<&LabeledWindow> = part.train.windows().iter().collect();
    let test: Vec<&LabeledWindow> = part.test.iter().collect();
    let (train, preprocessor, scores) =
        train_and_score(cfg, cell, &fit, &test, timeline.sampling_rate(), derive_seed(seed, &[FINAL_STREAM]))?;
    let labels: Vec<bool> = test.iter().map(|w| w.label == Label::Preictal).collect();
    let eval = roc_pr_curves(&scores, &labels)?;
    Ok(TestResult {
        cell,
        held_out_seizure: part.held_out_seizure,
        eval,
        scores,
        labels,
        starts_s: test.iter().map(|w| w.start_s).collect(),
        train,
        preprocessor,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub cv: CvResult,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    pub selected: Cell,
    pub test: TestResult,
}

/// Index of the best cell: highest mean validation AUC ROC, ties going to the
/// smaller PPL, then the smaller window.
pub fn select_cell(cells: &[CellResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let (m, bm) = (c.cv.mean_auc_roc, cells[b].cv.mean_auc_roc);
                let (cell, bc) = (c.cell, cells[b].cell);
                m > bm || (m == bm && (cell.ppl_s, cell.window_s) < (bc.ppl_s, bc.window_s))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Cross-validates every cell, selects one and retrains on the full training
/// partition for the test evaluation.
pub fn grid_search<E: Executor>(
    timeline: &PatientTimeline,
    cfg: &PipelineConfig,
    cells: &[Cell],
    seed: u64,
    exec: &E,
) -> Result<GridResult> {
    if cells.is_empty() {
        return Err(invalid!("empty grid"));
    }
    let mut results = Vec::with_capacity(cells.len());
    for (i, &cell) in cells.iter().enumerate() {
        let part = partition_for(timeline, cfg, cell, seed)?;
        let cv = run_cv(&part.train, cfg, cell, timeline.sampling_rate(), derive_seed(seed, &[i as u64]), exec)?;
        results.push(CellResult { cell, cv });
    }
    let selected = results[select_cell(&results).expect("non-empty grid")].cell;
    let test = fit_and_test(timeline, cfg, selected, seed)?;
    Ok(GridResult { cells: results, selected, test })
}
