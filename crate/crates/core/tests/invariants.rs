//! Property checks of type invariants: recordings, annotations, label
//! parameters, spectrograms, channel statistics, tensors, optimizer state,
//! cell selection and model outputs.

use proptest::prelude::*;

use preictal_core::autodiff::{Adam, ParamStore};
use preictal_core::dsp::{stft_magnitude, ChannelStats};
use preictal_core::models::{ArchConfig, ArchTag, Model};
use preictal_core::recording::{validate_annotations, PatientTimeline, PlacedRecording, Recording, SeizureAnnotation};
use preictal_core::segmentation::LabelParams;
use preictal_core::train::{select_cell, Cell, CellResult, CvResult};
use preictal_core::Tensor;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("EEG{c}")).collect()
}

proptest! {
    #[test]
    fn recordings_hold_full_channels(channels in 1usize..5, samples in 0usize..300, rate in 1.0f64..512.0) {
        let data: Vec<Vec<f32>> = (0..channels).map(|c| (0..samples).map(|i| (i * (c + 1)) as f32).collect()).collect();
        let rec = Recording::from_channels(rate, labels(channels), data).unwrap();
        prop_assert_eq!(rec.channels(), channels);
        prop_assert_eq!(rec.data().len(), channels * samples);
        for c in 0..channels {
            prop_assert_eq!(rec.channel(c).len(), samples);
        }
    }

    #[test]
    fn recordings_reject_bad_geometry(rate in -10.0f64..0.0, extra in 1usize..4) {
        prop_assert!(Recording::new(rate, labels(1), vec![0.0; 8]).is_err());
        prop_assert!(Recording::new(f64::NAN, labels(1), vec![0.0; 8]).is_err());
        prop_assert!(Recording::new(256.0, Vec::new(), Vec::new()).is_err());
        prop_assert!(Recording::new(256.0, labels(2), vec![0.0; 8 + extra * 2 - 1]).is_err());
    }

    #[test]
    fn annotations_must_be_ordered_disjoint_and_inside(
        raw in prop::collection::vec((0u32..500, 0u32..60), 1..6),
        duration in 100u32..3000,
    ) {
        let pairs: Vec<(f64, f64)> = raw.iter().map(|&(a, l)| (a as f64, (a + l) as f64)).collect();
        let well_formed = pairs.iter().all(|(a, b)| a < b);
        if !well_formed {
            prop_assert!(pairs.iter().any(|&(a, b)| SeizureAnnotation::new(a, b).is_err()));
            return Ok(());
        }
        let ann: Vec<SeizureAnnotation> = pairs.iter().map(|&(a, b)| SeizureAnnotation::new(a, b).unwrap()).collect();
        let valid = pairs.windows(2).all(|w| w[0].1 <= w[1].0) && pairs.last().unwrap().1 <= duration as f64;
        prop_assert_eq!(validate_annotations(&ann, Some(duration as f64)).is_ok(), valid);
    }

    #[test]
    fn timelines_reject_overlapping_recordings(len in 10usize..100, gap in -50i64..50) {
        let rec = || Recording::new(1.0, labels(1), vec![0.0; len]).unwrap();
        let second = len as i64 + gap;
        let pieces = vec![
            PlacedRecording { start_s: 0.0, recording: rec() },
            PlacedRecording { start_s: second as f64, recording: rec() },
        ];
        prop_assert_eq!(PatientTimeline::new(pieces, Vec::new()).is_ok(), gap >= 0);
    }

    #[test]
    fn label_params_validate_their_ranges(
        window in -5.0f64..60.0,
        ppl in 0.0f64..120.0,
        it in -10.0f64..10.0,
        d in -10.0f64..10.0,
    ) {
        let p = LabelParams { window_size_s: window, ppl_s: ppl, it_s: it, d_s: d, ..LabelParams::default() };
        let ok = window > 0.0 && ppl >= window && it >= 0.0 && d >= 0.0;
        prop_assert_eq!(p.validate().is_ok(), ok);
    }

    #[test]
    fn spectrogram_dims_and_sign(channels in 1usize..4, samples in 0usize..700, seg_pow in 4u32..8, hop_div in 1usize..4) {
        let seg = 1usize << seg_pow;
        let hop = (seg / (1 << hop_div)).max(1);
        let window: Vec<f32> = (0..channels * samples).map(|i| ((i * 37 % 101) as f32 - 50.0) / 7.0).collect();
        let out = stft_magnitude(&window, channels, 256.0, seg, hop);
        if samples < seg {
            prop_assert!(out.is_err());
            return Ok(());
        }
        let spec = out.unwrap();
        prop_assert_eq!(spec.freqs(), seg / 2 + 1);
        prop_assert_eq!(spec.frames(), (samples - seg) / hop + 1);
        prop_assert_eq!(spec.values.len(), channels * spec.freqs() * spec.frames());
        prop_assert!(spec.values.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn channel_stats_are_floored_and_idempotent(
        channels in 1usize..4,
        windows in prop::collection::vec(prop::collection::vec(-100.0f32..100.0, 12), 1..6),
        constant in any::<bool>(),
    ) {
        let n = 12 / channels * channels;
        let mut ws: Vec<Vec<f32>> = windows.into_iter().map(|w| w[..n].to_vec()).collect();
        if constant {
            let per = n / channels;
            for w in &mut ws {
                w[..per].iter_mut().for_each(|v| *v = 3.5);
            }
        }
        let stats = ChannelStats::compute(ws.iter().map(Vec::as_slice), channels).unwrap();
        prop_assert!(stats.std.iter().all(|&s| s > 0.0));
        let scaled: Vec<Vec<f32>> = ws.iter().map(|w| stats.apply(w).unwrap()).collect();
        if constant {
            let per = n / channels;
            prop_assert!(scaled.iter().all(|w| w[..per].iter().all(|&v| v == 0.0)));
        }
        let again = ChannelStats::compute(scaled.iter().map(Vec::as_slice), channels).unwrap();
        for w in &scaled {
            let twice = again.apply(w).unwrap();
            for (a, b) in twice.iter().zip(w) {
                prop_assert!((a - b).abs() < 1e-3, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn tensor_length_is_shape_product(shape in prop::collection::vec(1usize..5, 0..4), off in 1usize..3) {
        let n: usize = shape.iter().product();
        let t = Tensor::<f64>::new(&shape, vec![0.0; n]).unwrap();
        prop_assert_eq!(t.len(), n);
        prop_assert!(Tensor::<f64>::new(&shape, vec![0.0; n + off]).is_err());
    }

    #[test]
    fn adam_state_tracks_parameter_shape(shape in prop::collection::vec(1usize..5, 1..4), steps in 0usize..5) {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::full(&shape, 1.0));
        let adam = Adam::new(1e-3).unwrap();
        let n: usize = shape.iter().product();
        for _ in 0..steps {
            adam.step(&mut store, &[(id, vec![0.5; n])]);
        }
        let p = store.get(id);
        prop_assert_eq!(p.value.shape(), &shape[..]);
        prop_assert_eq!(p.m.len(), n);
        prop_assert_eq!(p.v.len(), n);
        prop_assert_eq!(p.step as usize, steps);
    }

    #[test]
    fn selected_cell_maximizes_mean_auc(aucs in prop::collection::vec(0u8..5, 1..16)) {
        let cells: Vec<CellResult> = aucs
            .iter()
            .enumerate()
            .map(|(i, &a)| CellResult {
                cell: Cell { window_s: [5.0, 10.0, 15.0, 30.0, 60.0][i % 5], ppl_s: [1800.0, 3600.0, 7200.0][i / 5] },
                cv: CvResult { folds: Vec::new(), mean_auc_roc: a as f64 / 4.0 },
            })
            .collect();
        let best = select_cell(&cells).unwrap();
        let top = cells.iter().map(|c| c.cv.mean_auc_roc).fold(f64::MIN, f64::max);
        prop_assert_eq!(cells[best].cv.mean_auc_roc, top);
        for c in cells.iter().filter(|c| c.cv.mean_auc_roc == top) {
            prop_assert!((cells[best].cell.ppl_s, cells[best].cell.window_s) <= (c.cell.ppl_s, c.cell.window_s));
        }
    }
}

fn small_config(tag: ArchTag, channels: usize) -> ArchConfig {
    let mut cfg = ArchConfig::new(tag, channels);
    cfg.image_size = 16;
    cfg.sub_image_size = 8;
    cfg.sub_windows = 3;
    cfg.sequence_len = 24;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn model_outputs_are_finite(tag_index in 0usize..6, channels in 1usize..3, batch in 1usize..3, seed in any::<u64>(), scale in 0.1f32..50.0) {
        let tag = ArchTag::ALL[tag_index];
        let cfg = small_config(tag, channels);
        let model = Model::<f32>::new(cfg.clone(), seed).unwrap();
        let mut shape = vec![batch];
        shape.extend(cfg.sample_shape());
        let n: usize = shape.iter().product();
        let x = Tensor::new(&shape, (0..n).map(|i| ((i * 7919 % 211) as f32 / 105.0 - 1.0) * scale).collect()).unwrap();
        let scores = if tag.is_autoencoder() {
            model.anomaly_scores(&x).unwrap()
        } else {
            let p = model.preictal_probabilities(&x).unwrap();
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            p
        };
        prop_assert_eq!(scores.len(), batch);
        prop_assert!(scores.iter().all(|v| v.is_finite()));
    }
}
