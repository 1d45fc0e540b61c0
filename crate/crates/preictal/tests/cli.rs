use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use preictal::edf::{parse_edf, write_edf, EdfWriteOptions};
use preictal::manifest::Manifest;
use preictal::report::cmd_report;
use preictal::synth::SynthFile;
use preictal_core::recording::Recording;
use preictal_core::segmentation::find_lead_seizures;

fn preictal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_preictal")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL_SPEC: &str = "\
patient_id = \"small\"
channels = 1
sampling_rate = 32.0
white_std = 1.0
pink_std = 2.0
ictal_amplitude = 20.0
[schedule]
first_onset_s = 2400.0
spacing_s = 3000.0
count = 4
seizure_s = 30.0
[signature]
band_lo_hz = 6.0
band_hi_hz = 8.0
amplitude = 4.0
preictal_s = 600.0
";

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn default_synth_spec_has_three_lead_seizures() {
    let spec = SynthFile::default().spec().unwrap();
    let leads = find_lead_seizures(&spec.annotations().unwrap(), 1800.0).unwrap();
    assert!(leads.len() >= 3, "{leads:?}");
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.toml"), SMALL_SPEC).unwrap();
    for out in ["a", "b", "c"] {
        let seed = if out == "c" { "8" } else { "7" };
        ok(&preictal(&["synth", "--config", "spec.toml", "--seed", seed, "--out", out], dir.path()));
    }
    let (a, b, c) = (files(&dir.path().join("a")), files(&dir.path().join("b")), files(&dir.path().join("c")));
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn two_seizures_fail_the_partition() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SMALL_SPEC.replace("count = 4", "count = 2");
    std::fs::write(dir.path().join("spec.toml"), spec).unwrap();
    ok(&preictal(&["synth", "--config", "spec.toml", "--out", "data"], dir.path()));
    std::fs::write(
        dir.path().join("exp.toml"),
        "manifest = \"data/manifest.toml\"\narchitecture = \"tcn\"\n[labels]\nwindow_size_s = 10.0\nppl_s = 600.0\n",
    )
    .unwrap();
    let out = preictal(&["run", "--config", "exp.toml", "--out", "run"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("insufficient lead seizures: found 2, need at least 3"), "{err}");
    assert!(!dir.path().join("run").join("results.csv").exists());
}

#[test]
fn run_and_report_on_a_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SMALL_SPEC
        .replace("spacing_s = 3000.0", "spacing_s = 10000.0")
        .replace("first_onset_s = 2400.0", "first_onset_s = 7300.0");
    std::fs::write(dir.path().join("spec.toml"), spec).unwrap();
    ok(&preictal(&["synth", "--config", "spec.toml", "--seed", "2", "--out", "data"], dir.path()));
    std::fs::write(
        dir.path().join("exp.toml"),
        "manifest = \"data/manifest.toml\"\nseed = 4\noutput = \"run\"\narchitectures = [\"cnn\", \"tcn_ae\"]\ngrid = true\n\
         [labels]\ninterictal_downsample = 4\n\
         [train]\nepochs = 1\nbatch_size = 16\nlearning_rate = 0.002\nmax_batches_per_epoch = 2\n\
         [input]\nimage_size = 8\ndownsample = 8\n",
    )
    .unwrap();
    ok(&preictal(&["run", "--config", "exp.toml", "--jobs", "2"], dir.path()));
    let run = dir.path().join("run");
    for f in ["results.csv", "run.toml", "config.toml", "checkpoints/cnn.ixck", "losses/tcn_ae.csv", "scores/cnn_test.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let run_manifest = std::fs::read_to_string(run.join("run.toml")).unwrap();
    assert!(run_manifest.contains("config_sha256") && run_manifest.contains("seed = 4"));

    ok(&preictal(&["report", "run"], dir.path()));
    let report = cmd_report(&run, Some(&dir.path().join("again"))).unwrap();
    assert_eq!(report.comparison.len(), 2);
    assert!(report.comparison.iter().all(|r| r.params == "optimized"));
    assert_eq!(report.grids["cnn"].len(), 15);
    assert_eq!(report.grids["tcn_ae"].iter().filter(|g| g.selected).count(), 1);
    let roc = std::fs::read_to_string(run.join("report/roc_cnn.csv")).unwrap();
    let lines: Vec<&str> = roc.lines().collect();
    assert_eq!(lines[0], "fpr,tpr");
    assert_eq!(lines[1], "0.0,0.0");
    assert_eq!(*lines.last().unwrap(), "1.0,1.0");
    let grid = std::fs::read_to_string(run.join("report/grid_cnn.csv")).unwrap();
    assert_eq!(grid.lines().count(), 16);
    assert!(run.join("report/grid_cnn.svg").is_file() && run.join("report/comparison.svg").is_file());
}

#[test]
fn report_lists_missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = preictal(&["report", "."], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing run artifacts") && err.contains("results.csv") && err.contains("run.toml"), "{err}");
}

fn edf_fixture(seed: f32, start_time: &str) -> (Recording, Vec<u8>) {
    let data = (0..2 * 256 * 4).map(|i| ((i as f32 * 0.05 + seed).sin() * 80.0).round()).collect();
    let rec = Recording::new(256.0, vec!["FP1-F7".into(), "C3-P3".into()], data).unwrap();
    let opts = EdfWriteOptions { start_time: start_time.into(), ..EdfWriteOptions::default() };
    let bytes = write_edf(&rec, &opts).unwrap();
    (parse_edf(&bytes).unwrap(), bytes)
}

#[test]
fn batch_convert_writes_one_output_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("edf");
    std::fs::create_dir(&src).unwrap();
    let mut parsed = Vec::new();
    for (i, (name, time)) in [("p_01.edf", "10.00.00"), ("p_02.edf", "11.00.00"), ("p_03.edf", "12.30.00")].iter().enumerate() {
        let (rec, bytes) = edf_fixture(i as f32, time);
        std::fs::write(src.join(name), bytes).unwrap();
        parsed.push(rec);
    }
    let before = files(&src);
    ok(&preictal(&["convert", "edf", "--out", "out"], dir.path()));
    assert_eq!(files(&src), before, "inputs untouched");

    let out = dir.path().join("out");
    let manifest = Manifest::load(&out.join("manifest.toml")).unwrap();
    assert_eq!(manifest.recordings.len(), 3);
    let starts: Vec<f64> = manifest.recordings.iter().map(|r| r.start_s).collect();
    assert_eq!(starts, [0.0, 3600.0, 9000.0]);
    let tl = manifest.timeline(&out).unwrap();
    for (piece, rec) in tl.pieces().iter().zip(&parsed) {
        assert_eq!(&piece.recording, rec);
    }
}

#[test]
fn unknown_extension_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("data.mat"), b"MATLAB").unwrap();
    let out = preictal(&["convert", "data.mat", "--out", "out"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported format"));
}

#[test]
fn parse_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut bytes) = edf_fixture(0.0, "00.00.00");
    bytes[236..244].copy_from_slice(b"abcdefgh");
    std::fs::write(dir.path().join("bad.edf"), bytes).unwrap();
    let out = preictal(&["convert", "bad.edf", "--out", "out"], dir.path());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!out.status.success());
    assert!(err.contains("bad.edf") && err.contains("byte 236"), "{err}");
}
