//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use mfld_core::data::dataset_write;
use mfld_core::ensemble::matrix_write;

use crate::checkpoint::write_checkpoint;
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiments;
use crate::records::{check_records, emit_csv, MetricRecord};
use crate::svg::emit_heatmap_svg;

#[derive(Debug, Parser)]
#[command(
    name = "mfld",
    version,
    about = "Train, merge and evaluate mean-field neural networks"
)]
struct Cli {
    /// JSON config overlaying the experiment's defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the configured task and write train/test CSVs.
    GenData,
    /// Train one network and write its checkpoint and loss trajectory.
    Train,
    /// Concatenate the particles of several checkpoints.
    Merge {
        /// Checkpoint CSVs (each with a JSON sidecar).
        checkpoints: Vec<PathBuf>,
    },
    /// Randomly keep a subset of a checkpoint's particles.
    Prune {
        checkpoint: Option<PathBuf>,
        /// Number of particles to keep.
        #[arg(long)]
        keep: Option<usize>,
    },
    /// Sup-norm grid over member width N and ensemble size M.
    Heatmap,
    /// Short runs over a list of temperatures.
    LambdaSweep,
    /// Noise calibration against the Ornstein-Uhlenbeck stationary law.
    Stationary,
    /// Synthetic low-rank adapter merging.
    Lora,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::GenData => Experiment::GenData,
            Command::Train => Experiment::Train,
            Command::Merge { .. } => Experiment::Merge,
            Command::Prune { .. } => Experiment::Prune,
            Command::Heatmap => Experiment::MergeHeatmap,
            Command::LambdaSweep => Experiment::LambdaSweep,
            Command::Stationary => Experiment::StationaryCheck,
            Command::Lora => Experiment::LoraMerge,
        }
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code: 0 on success, 1 for usage or config
/// errors, 2 for failures while running.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let mut summaries = Vec::new();
    let outcome = run(&cli, &mut summaries);
    let _ = std::io::stdout().write_all(&summaries);
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let experiment = cli.command.experiment();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path, experiment)?,
        None => ExperimentConfig::defaults(experiment),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match &cli.command {
        Command::Merge { checkpoints } if !checkpoints.is_empty() => {
            cfg.checkpoints = checkpoints.clone();
        }
        Command::Prune { checkpoint, keep } => {
            if let Some(path) = checkpoint {
                cfg.checkpoints = vec![path.clone()];
            }
            if let Some(keep) = keep {
                cfg.keep = *keep;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, out: &mut Vec<u8>) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match cli.threads {
        Some(0) => Err(HarnessError::config("--threads must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::config(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| execute(&cfg, out))
        }
        None => execute(&cfg, out),
    }
}

fn summary(out: &mut impl Write, path: &Path, what: &str) {
    let _ = writeln!(out, "wrote {} ({what})", path.display());
}

fn write_records(out: &mut impl Write, records: &[MetricRecord], path: &Path) -> Result<()> {
    check_records(records)?;
    emit_csv(records, path)?;
    summary(out, path, &format!("{} records", records.len()));
    Ok(())
}

fn write_network(
    out: &mut impl Write,
    system: &mfld_core::ParticleSystem64,
    path: &Path,
) -> Result<()> {
    write_checkpoint(system, path)?;
    summary(
        out,
        path,
        &format!(
            "{} particles, input dimension {}",
            system.len(),
            system.input_dim()
        ),
    );
    Ok(())
}

/// Runs the configured experiment and writes its artifacts and
/// `manifest.json` into `cfg.output_dir`, with one summary line per
/// artifact to `out`.
pub fn execute(cfg: &ExperimentConfig, out: &mut (impl Write + Send)) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    match cfg.experiment {
        Experiment::GenData => {
            let (train, test) = experiments::run_gen_data(cfg)?;
            for (name, data) in [("train.csv", &train), ("test.csv", &test)] {
                let path = dir.join(name);
                dataset_write(data, &path)?;
                summary(out, &path, &format!("{} examples", data.len()));
            }
        }
        Experiment::Train => {
            let outcome = experiments::run_train(cfg)?;
            write_network(out, &outcome.network, &dir.join("model.csv"))?;
            write_records(out, &outcome.records, &dir.join("trajectory.csv"))?;
        }
        Experiment::Merge => {
            write_network(out, &experiments::run_merge(cfg)?, &dir.join("merged.csv"))?;
        }
        Experiment::Prune => {
            write_network(out, &experiments::run_prune(cfg)?, &dir.join("pruned.csv"))?;
        }
        Experiment::MergeHeatmap => {
            let records = experiments::run_merge_heatmap(cfg)?;
            write_records(out, &records, &dir.join("heatmap.csv"))?;
            let svg = dir.join("heatmap.svg");
            emit_heatmap_svg(&records, &svg)?;
            summary(
                out,
                &svg,
                &format!("{} x {} cells", cfg.n_list.len(), cfg.m_list.len()),
            );
        }
        Experiment::LambdaSweep => {
            write_records(
                out,
                &experiments::run_lambda_sweep(cfg)?,
                &dir.join("lambda_sweep.csv"),
            )?;
        }
        Experiment::StationaryCheck => {
            write_records(
                out,
                &experiments::run_stationary_check(cfg)?,
                &dir.join("stationary.csv"),
            )?;
        }
        Experiment::LoraMerge => {
            let outcome = experiments::lora_experiment(cfg)?;
            write_records(out, &outcome.records, &dir.join("lora.csv"))?;
            let path = dir.join("lora_delta.csv");
            matrix_write(&outcome.example_delta, &path)?;
            let (rows, cols) = outcome.example_delta.dim();
            summary(
                out,
                &path,
                &format!("{rows} x {cols} merged update of task 0"),
            );
        }
    }
    let manifest = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    fs::write(&manifest, text + "\n").map_err(|e| HarnessError::io(&manifest, e))?;
    summary(out, &manifest, "resolved config");
    Ok(())
}
