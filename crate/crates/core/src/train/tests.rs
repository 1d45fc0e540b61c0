use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::models::{ArchConfig, ArchTag};
use crate::segmentation::{Label, LabeledWindow, TrainingSet};

/// Sequences of length 32: preictal samples carry a sinusoid, interictal
/// ones are noise of the same power.
fn separable(n: usize, seed: u64) -> Prepared {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let pre = i % 3 == 0;
        let phase = rng.gen::<f32>() * 6.28;
        for t in 0..32 {
            let v = if pre { (t as f32 * 0.8 + phase).sin() * 1.4 } else { rng.gen::<f32>() * 3.4 - 1.7 };
            values.push(v);
        }
        labels.push(if pre { Label::Preictal } else { Label::Interictal });
    }
    Prepared { sample_shape: vec![1, 32], values, labels }
}

fn tcn_arch(tag: ArchTag) -> ArchConfig {
    let mut a = ArchConfig::new(tag, 1);
    a.sequence_len = 32;
    a
}

fn quick(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig { epochs, batch_size: 16, learning_rate: lr, max_batches_per_epoch: None }
}

#[test]
fn defaults() {
    let s = TrainConfig::supervised();
    assert_eq!((s.epochs, s.batch_size, s.learning_rate), (100, 128, 1e-4));
    let u = TrainConfig::unsupervised();
    assert_eq!((u.epochs, u.batch_size, u.learning_rate), (500, 128, 5e-4));
    assert_eq!(Mode::of(ArchTag::TcnAe), Mode::Unsupervised);
    assert_eq!("supervised".parse::<Mode>().unwrap(), Mode::Supervised);
    assert!(TrainConfig { epochs: 0, ..s.clone() }.validate().is_err());
    assert!(TrainConfig { learning_rate: -1.0, ..s }.validate().is_err());
}

#[test]
fn class_weight_rule() {
    let w = class_weights([900, 100]).unwrap();
    assert!((w[0] - 1000.0 / 1800.0).abs() < 1e-12);
    assert!((w[1] - 5.0).abs() < 1e-12);
    assert!((w[0] - 0.556).abs() < 1e-3);
    assert!(class_weights([10, 0]).is_err());
}

#[test]
fn supervised_training_converges_and_is_deterministic() {
    let data = separable(48, 1);
    let a = train_supervised(tcn_arch(ArchTag::Tcn), &data, &quick(40, 3e-3), 7).unwrap();
    assert!(*a.losses.last().unwrap() < 0.1 * a.losses[0], "{:?}", a.losses);
    let b = train_supervised(tcn_arch(ArchTag::Tcn), &data, &quick(40, 3e-3), 7).unwrap();
    assert_eq!(a.losses, b.losses);
    let scores = score(&a.model, &data, 10).unwrap();
    assert_eq!(scores.len(), data.len());
    assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn single_class_training_set_is_rejected() {
    let mut data = separable(6, 2);
    data.labels.iter_mut().for_each(|l| *l = Label::Interictal);
    assert!(matches!(train_supervised(tcn_arch(ArchTag::Tcn), &data, &quick(1, 1e-3), 0), Err(Error::Validation(_))));
}

#[test]
fn autoencoder_guard_and_training() {
    let data = separable(24, 3);
    assert!(matches!(train_autoencoder(tcn_arch(ArchTag::TcnAe), &data, &quick(1, 1e-3), 0), Err(Error::Leakage(_))));
    let mut inter = data.clone();
    let keep: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == Label::Interictal).collect();
    inter.values = keep.iter().flat_map(|&i| data.values[i * 32..(i + 1) * 32].to_vec()).collect();
    inter.labels = vec![Label::Interictal; keep.len()];
    let a = train_autoencoder(tcn_arch(ArchTag::TcnAe), &inter, &quick(20, 1e-3), 4).unwrap();
    assert!(a.losses.last().unwrap() < &a.losses[0], "{:?}", a.losses);
    let b = train_autoencoder(tcn_arch(ArchTag::TcnAe), &inter, &quick(20, 1e-3), 4).unwrap();
    assert_eq!(a.losses, b.losses);
    assert!(score(&a.model, &data, 7).unwrap().iter().all(|&s| s >= 0.0));
    assert!(train_autoencoder(tcn_arch(ArchTag::Tcn), &inter, &quick(1, 1e-3), 0).is_err());
}

#[test]
fn batch_cap_limits_steps() {
    let data = separable(48, 5);
    let capped = TrainConfig { max_batches_per_epoch: Some(1), ..quick(2, 1e-3) };
    let a = train_supervised(tcn_arch(ArchTag::Tcn), &data, &capped, 1).unwrap();
    assert_eq!(a.losses.len(), 2);
}

#[test]
fn grid_has_fifteen_cells() {
    let cells = grid_cells();
    assert_eq!(cells.len(), 15);
    assert_eq!(GRID_WINDOWS_S, [5.0, 10.0, 15.0, 30.0, 60.0]);
    assert_eq!(GRID_PPL_S, [1800.0, 3600.0, 7200.0]);
    assert!(cells.contains(&FIXED_CELL));
    assert_eq!(FIXED_CELL, Cell { window_s: 30.0, ppl_s: 3600.0 });
}

fn scored(seizure: usize, auc: f64) -> FoldResult {
    FoldResult { fold_seizure: seizure, outcome: FoldOutcome::Scored { auc_roc: auc, auc_pr: 0.5 } }
}

#[test]
fn fold_mean_skips_unscored_folds() {
    let folds = [scored(0, 0.6), scored(1, 0.8), scored(2, 1.0)];
    assert!((mean_fold_auc(&folds).unwrap() - 0.8).abs() < 1e-12);
    let skipped = FoldResult { fold_seizure: 3, outcome: FoldOutcome::Skipped("single class") };
    assert!((mean_fold_auc(&[scored(0, 0.6), skipped.clone()]).unwrap() - 0.6).abs() < 1e-12);
    assert!(matches!(mean_fold_auc(&[skipped]), Err(Error::AllFoldsSkipped)));
}

#[test]
fn selection_is_argmax_with_tie_rules() {
    let cell = |w, p, m| CellResult { cell: Cell { window_s: w, ppl_s: p }, cv: CvResult { folds: vec![], mean_auc_roc: m } };
    let cells = [cell(5.0, 7200.0, 0.7), cell(30.0, 1800.0, 0.9), cell(10.0, 3600.0, 0.9), cell(15.0, 1800.0, 0.9)];
    let best = select_cell(&cells).unwrap();
    assert_eq!(cells[best].cell, Cell { window_s: 15.0, ppl_s: 1800.0 });
    assert!(cells.iter().all(|c| c.cv.mean_auc_roc <= cells[best].cv.mean_auc_roc));
}

#[test]
fn cv_refuses_a_leaky_training_set() {
    let w = |seizure| LabeledWindow {
        data: vec![0.0; 8],
        channels: 1,
        label: Label::Interictal,
        seizure_index: seizure,
        start_s: seizure as f64,
        end_s: seizure as f64 + 1.0,
    };
    let leaky = TrainingSet::from_windows(vec![w(0), w(1), w(2)], 2);
    let cfg = PipelineConfig::new(ArchTag::Tcn);
    let r = run_cv(&leaky, &cfg, FIXED_CELL, 8.0, 0, &Sequential);
    assert!(matches!(r, Err(Error::Leakage(_))));
}
