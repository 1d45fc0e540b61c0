use preictal_core::models::ArchTag;
use preictal_core::recording::PatientTimeline;
use preictal_core::synth::{synthesize_recording, Signature, SynthSpec};
use preictal_core::train::{fit_and_test, grid_search, Cell, PipelineConfig, Sequential, TrainConfig};

fn patient(seed: u64) -> PatientTimeline {
    let spec = SynthSpec {
        duration_s: 4.0 * 3000.0 + 600.0,
        channels: 1,
        sampling_rate: 64.0,
        seizures: SynthSpec::evenly_spaced(2400.0, 3000.0, 4, 30.0),
        signature: Signature { band_lo_hz: 18.0, band_hi_hz: 22.0, amplitude: 4.0, preictal_s: 600.0 },
        white_std: 1.0,
        pink_std: 2.0,
        ictal_amplitude: 20.0,
        seed,
    };
    let (rec, ann) = synthesize_recording(&spec).unwrap();
    PatientTimeline::single(rec, ann).unwrap()
}

fn config(tag: ArchTag) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(tag);
    cfg.train = TrainConfig { epochs: 6, batch_size: 16, learning_rate: 2e-3, max_batches_per_epoch: None };
    cfg.input.image_size = 16;
    cfg
}

const CELL: Cell = Cell { window_s: 10.0, ppl_s: 600.0 };

#[test]
fn cnn_separates_synthetic_preictal_windows() {
    let tl = patient(1);
    let r = fit_and_test(&tl, &config(ArchTag::Cnn), CELL, 3).unwrap();
    assert_eq!(r.held_out_seizure, 3);
    assert_eq!(r.scores.len(), r.labels.len());
    assert!(r.eval.auc_roc > 0.9, "{}", r.eval.auc_roc);
    let again = fit_and_test(&tl, &config(ArchTag::Cnn), CELL, 3).unwrap();
    assert_eq!(r.scores, again.scores);
}

#[test]
fn grid_search_runs_every_cell() {
    let tl = patient(2);
    let mut cfg = config(ArchTag::Tcn);
    cfg.train.epochs = 2;
    let cells = [CELL, Cell { window_s: 10.0, ppl_s: 300.0 }];
    let g = grid_search(&tl, &cfg, &cells, 5, &Sequential).unwrap();
    assert_eq!(g.cells.len(), 2);
    assert!(g.cells.iter().all(|c| c.cv.folds.len() == 3));
    let best = g.cells.iter().map(|c| c.cv.mean_auc_roc).fold(f64::MIN, f64::max);
    assert_eq!(g.cells.iter().find(|c| c.cell == g.selected).unwrap().cv.mean_auc_roc, best);
    assert_eq!(g.test.cell, g.selected);
}
