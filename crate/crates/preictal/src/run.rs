//! `run`: segment, grid-search or fix the cell, train, test, and write the
//! run directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! results.csv              one row per CV fold, per cell mean, and per test
//! run.toml                 config hash, seed, version, data hash
//! config.toml              effective configuration
//! curves/<arch>_roc.csv    test ROC points (fpr, tpr)
//! curves/<arch>_pr.csv     test PR points (recall, precision)
//! scores/<arch>_test.csv   per-window test scores
//! losses/<arch>.csv        mean training loss per epoch
//! checkpoints/<arch>.ixck  final model with its preprocessor
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use preictal_core::models::ArchTag;
use preictal_core::rng::derive_seed;
use preictal_core::train::{fit_and_test, grid_cells, grid_search, Cell, CellResult, FoldOutcome, Mode, TestResult};

use crate::config::ExperimentConfig;
use crate::error::{self, Error, Result};
use crate::exec::Parallel;
use crate::manifest::Manifest;
use crate::checkpoint;

pub const RESULTS: &str = "results.csv";
pub const RUN_MANIFEST: &str = "run.toml";
pub const CONFIG_COPY: &str = "config.toml";

/// One line of `results.csv`. `split` is `fold<k>` (k = validation seizure),
/// `cv_mean`, or `test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub patient: String,
    pub arch: String,
    pub mode: String,
    pub window_s: f64,
    pub ppl_s: f64,
    pub split: String,
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub manifest_sha256: String,
    pub patient_id: String,
    pub architectures: Vec<String>,
    pub grid: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed of one architecture's experiment; independent of list order.
pub fn arch_seed(seed: u64, tag: ArchTag) -> u64 {
    let idx = ArchTag::ALL.iter().position(|t| *t == tag).expect("tag in ALL") as u64;
    derive_seed(seed, &[idx])
}

pub struct RunOptions {
    /// Replaces the config's seed.
    pub seed: Option<u64>,
    /// Replaces the config's output directory.
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: None, out: None, jobs: 1 }
    }
}

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: Vec<ResultRow>,
}

/// Loads the config at `config_path` and runs it.
pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let base = config_path.parent().unwrap_or(Path::new(""));
    let out = match (&opts.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => return Err(Error::Config("no output directory: set `output` or pass --out".into())),
    };
    run_experiment(&cfg, base, &out, opts.jobs)
}

/// Runs every configured architecture on the manifest's patient and writes the
/// run directory. Paths in `cfg` resolve against `base`.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path, out: &Path, jobs: usize) -> Result<RunSummary> {
    cfg.validate()?;
    let tags = cfg.architectures()?;
    let manifest_path = base.join(&cfg.manifest);
    if !manifest_path.is_file() {
        return Err(Error::Config(format!("manifest {} does not exist", manifest_path.display())));
    }
    let manifest_bytes = error::read(&manifest_path)?;
    let manifest = Manifest::load(&manifest_path)?;
    let timeline = manifest.timeline(manifest_path.parent().unwrap_or(Path::new("")))?;
    let exec = Parallel::new(jobs)?;

    let mut rows = Vec::new();
    let mut tests = Vec::new();
    for &tag in &tags {
        let pc = cfg.pipeline(tag);
        let seed = arch_seed(cfg.seed, tag);
        let mode = Mode::of(tag);
        let row = |cell: Cell, split: String, auc: Option<(f64, f64)>, note: String| ResultRow {
            patient: manifest.patient_id.clone(),
            arch: tag.to_string(),
            mode: mode.to_string(),
            window_s: cell.window_s,
            ppl_s: cell.ppl_s,
            split,
            auc_roc: auc.map(|a| a.0),
            auc_pr: auc.map(|a| a.1),
            note,
        };
        eprintln!("[{tag}] {} on patient {}", if cfg.grid { "grid search" } else { "fixed cell" }, manifest.patient_id);
        let test = if cfg.grid {
            let grid = grid_search(&timeline, &pc, &grid_cells(), seed, &exec).map_err(Error::from)?;
            for CellResult { cell, cv } in &grid.cells {
                for f in &cv.folds {
                    let (auc, note) = match &f.outcome {
                        FoldOutcome::Scored { auc_roc, auc_pr } => (Some((*auc_roc, *auc_pr)), String::new()),
                        FoldOutcome::Skipped(why) => (None, format!("skipped: {why}")),
                    };
                    rows.push(row(*cell, format!("fold{}", f.fold_seizure), auc, note));
                }
                let note = if *cell == grid.selected { "selected" } else { "" };
                rows.push(ResultRow { auc_roc: Some(cv.mean_auc_roc), ..row(*cell, "cv_mean".into(), None, note.into()) });
                eprintln!("[{tag}] cell {} s / {} s: mean validation AUC ROC {:.4}", cell.window_s, cell.ppl_s, cv.mean_auc_roc);
            }
            grid.test
        } else {
            fit_and_test(&timeline, &pc, cfg.fixed_cell(), seed)?
        };
        eprintln!("[{tag}] test AUC ROC {:.4}, AUC PR {:.4}", test.eval.auc_roc, test.eval.auc_pr);
        rows.push(row(
            test.cell,
            "test".into(),
            Some((test.eval.auc_roc, test.eval.auc_pr)),
            format!("held_out_seizure={}", test.held_out_seizure),
        ));
        tests.push((tag, test));
    }

    write_results(&out.join(RESULTS), &rows)?;
    for (tag, test) in &tests {
        write_test_artifacts(out, *tag, test)?;
    }
    let run = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        manifest_sha256: sha256_hex(&manifest_bytes),
        patient_id: manifest.patient_id.clone(),
        architectures: tags.iter().map(|t| t.to_string()).collect(),
        grid: cfg.grid,
    };
    error::write(&out.join(RUN_MANIFEST), toml::to_string(&run).expect("run manifest serializes"))?;
    let mut copy = cfg.clone();
    copy.manifest = std::path::absolute(&manifest_path).unwrap_or(manifest_path);
    copy.output = None;
    error::write(&out.join(CONFIG_COPY), copy.to_toml())?;
    Ok(RunSummary { out_dir: out.to_path_buf(), rows })
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    error::write(path, w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let bytes = error::read(path)?;
    csv::Reader::from_reader(bytes.as_slice())
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(|e| Error::from(e).in_file(path))
}

fn write_pairs<A: Serialize, B: Serialize>(path: &Path, header: [&str; 2], points: impl IntoIterator<Item = (A, B)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for (a, b) in points {
        w.serialize((a, b))?;
    }
    error::write(path, w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
}

pub fn curve_paths(out: &Path, arch: &str) -> [PathBuf; 2] {
    [out.join("curves").join(format!("{arch}_roc.csv")), out.join("curves").join(format!("{arch}_pr.csv"))]
}

fn write_test_artifacts(out: &Path, tag: ArchTag, test: &TestResult) -> Result<()> {
    let [roc, pr] = curve_paths(out, tag.as_str());
    write_pairs(&roc, ["fpr", "tpr"], test.eval.roc.iter().copied())?;
    write_pairs(&pr, ["recall", "precision"], test.eval.pr.iter().copied())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["start_s", "preictal", "score"])?;
    for ((s, l), v) in test.starts_s.iter().zip(&test.labels).zip(&test.scores) {
        w.serialize((s, u8::from(*l), v))?;
    }
    let scores = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    error::write(&out.join("scores").join(format!("{tag}_test.csv")), scores)?;

    write_pairs(
        &out.join("losses").join(format!("{tag}.csv")),
        ["epoch", "loss"],
        test.train.losses.iter().enumerate().map(|(i, l)| (i + 1, *l)),
    )?;
    let ck = checkpoint::encode(&test.train.model, Some(&test.preprocessor), true);
    error::write(&out.join("checkpoints").join(format!("{tag}.ixck")), ck)
}
