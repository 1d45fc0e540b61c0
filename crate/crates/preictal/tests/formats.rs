use proptest::prelude::*;

use preictal::edf::{parse_edf, parse_header, write_edf, EdfWriteOptions};
use preictal::raw::{read_raw, write_raw};
use preictal::Error;
use preictal_core::recording::Recording;

fn recordings() -> impl Strategy<Value = Recording> {
    (1usize..5, prop::sample::select(vec![64.0, 100.0, 256.0]), 0usize..4, -5000.0f32..5000.0, 0.01f32..2000.0)
        .prop_flat_map(|(channels, rate, records, offset, scale)| {
            let n = channels * records * rate as usize;
            prop::collection::vec(-1.0f32..1.0, n).prop_map(move |unit| {
                let data = unit.into_iter().map(|u| offset + scale * u).collect();
                let labels = (0..channels).map(|c| format!("EEG {c}")).collect();
                Recording::new(rate, labels, data).unwrap()
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edf_round_trip_within_one_quantization_step(rec in recordings()) {
        let bytes = write_edf(&rec, &EdfWriteOptions::default()).unwrap();
        let header = parse_header(&bytes).unwrap();
        let back = parse_edf(&bytes).unwrap();
        prop_assert_eq!(back.channel_labels(), rec.channel_labels());
        prop_assert_eq!(back.samples_per_channel(), rec.samples_per_channel());
        for c in 0..rec.channels() {
            let step = header.signals[c].gain();
            for (a, b) in rec.channel(c).iter().zip(back.channel(c)) {
                prop_assert!((*a as f64 - *b as f64).abs() <= step, "{} vs {} (step {})", a, b, step);
            }
        }
    }

    #[test]
    fn raw_round_trip_is_bit_exact(rec in recordings()) {
        let back = read_raw(&write_raw(&rec).unwrap()).unwrap();
        prop_assert_eq!(back.sampling_rate().to_bits(), rec.sampling_rate().to_bits());
        prop_assert!(back.data().iter().zip(rec.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back.data().len(), rec.data().len());
    }

    #[test]
    fn truncated_edf_is_reported(rec in recordings(), cut in 1usize..200) {
        prop_assume!(rec.samples_per_channel() > 0);
        let bytes = write_edf(&rec, &EdfWriteOptions::default()).unwrap();
        let keep = bytes.len().saturating_sub(cut).max(256 * (1 + rec.channels()));
        prop_assume!(keep < bytes.len());
        let truncated = matches!(parse_edf(&bytes[..keep]), Err(Error::Truncated { .. }));
        prop_assert!(truncated, "cut to {} of {} bytes", keep, bytes.len());
    }
}
