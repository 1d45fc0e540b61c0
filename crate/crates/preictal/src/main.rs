use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use preictal::run::{cmd_run, RunOptions};
use preictal::{convert, report, synth};

/// Seizure-prediction experiments on scalp and intracranial EEG.
#[derive(Parser)]
#[command(name = "preictal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert EDF or .eegr files (a file or a directory) to .eegr plus a manifest stub.
    Convert {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic patient (recording, annotations, manifest).
    Synth {
        /// Spec file (TOML); defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment: segment, search or fix parameters, train, test.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for cross-validation folds.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Replaces the output directory in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tables and figures from a finished run directory.
    Report {
        run: PathBuf,
        /// Defaults to <run>/report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert { input, out } => convert::cmd_convert(&input, &out).map(|c| {
            println!("converted {} file(s); manifest at {}", c.outputs.len(), c.manifest_path.display());
        }),
        Command::Synth { config, seed, out } => synth::cmd_synth(config.as_deref(), seed, &out).map(|s| {
            println!(
                "synthesized {} s, {} seizure(s); manifest at {}",
                s.spec.duration_s,
                s.spec.seizures.len(),
                s.manifest_path.display()
            );
        }),
        Command::Run { config, seed, jobs, out } => cmd_run(&config, &RunOptions { seed, out, jobs }).map(|s| {
            for r in s.rows.iter().filter(|r| r.split == "test") {
                println!(
                    "{} {} window {} s, PPL {} s: AUC ROC {:.4}, AUC PR {:.4}",
                    r.patient,
                    r.arch,
                    r.window_s,
                    r.ppl_s,
                    r.auc_roc.unwrap_or(f64::NAN),
                    r.auc_pr.unwrap_or(f64::NAN)
                );
            }
            println!("results in {}", s.out_dir.display());
        }),
        Command::Report { run, out } => report::cmd_report(&run, out.as_deref()).map(|r| {
            println!("report in {}", r.out_dir.display());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
