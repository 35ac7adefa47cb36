//! Command-line experiment runner: `train`, `eval`, and `timing`
//! subcommands over a shared TOML config with `key=value` overrides.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use deepbeam::beamnet::checkpoint::save_checkpoint;
use deepbeam::config::{load_config, FileConfig};
use deepbeam::experiments::{resolve_methods, Experiment, ExperimentKind};
use deepbeam::training::{log_to_csv, train};

#[derive(Parser)]
#[command(
    name = "deepbeam",
    about = "Robust deep-learning beamformer: training, evaluation, and timing experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the beamformer and write the best checkpoint plus the
    /// convergence log.
    Train(CommonArgs),
    /// Run the configured rate experiment and write its CSV.
    Eval(CommonArgs),
    /// Measure per-sample solve time per method and power budget.
    Timing(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; omitted sections fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the scenario and training seeds.
    #[arg(long)]
    seed: Option<u64>,

    /// Output path (CSV).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Checkpoint to write (train) or read (eval/timing "dnn" method).
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Dotted config overrides, e.g. scenario.users=8 train.batch_size=256
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl CommonArgs {
    fn config(&self) -> Result<FileConfig> {
        load_config(self.config.as_deref(), &self.overrides, self.seed)
            .context("failed to load configuration")
    }
}

fn write_out(path: &PathBuf, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .with_context(|| format!("failed to write {}", path.display()))
}

fn run_train(args: &CommonArgs) -> Result<()> {
    let cfg = args.config()?;
    let out = args.out.clone().unwrap_or_else(|| "training_log.csv".into());
    let ckpt = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| "checkpoint.bin".into());

    eprintln!(
        "training M={} K={} for up to {} epochs ({} batches of {})",
        cfg.scenario.antennas,
        cfg.scenario.users,
        cfg.train.max_epochs,
        cfg.train.batches_per_epoch,
        cfg.train.batch_size
    );
    let state = train(&cfg.train, &cfg.scenario)?;
    write_out(&out, &log_to_csv(&state.log))?;
    save_checkpoint(&state.best_params, &ckpt)?;
    println!(
        "finished after {} epochs; best validation sum rate {:.4} bits/s/Hz",
        state.epoch, state.best_val_rate
    );
    println!("log: {}", out.display());
    println!("checkpoint: {}", ckpt.display());
    if let Some(reason) = state.abort_reason {
        bail!("training aborted early ({reason}); best checkpoint retained");
    }
    Ok(())
}

fn run_eval(args: &CommonArgs, forced_kind: Option<ExperimentKind>) -> Result<()> {
    let mut cfg = args.config()?;
    if let Some(kind) = forced_kind {
        cfg.experiment.kind = kind;
    }
    let default_name = match cfg.experiment.kind {
        ExperimentKind::Timing => "timing.csv",
        _ => "results.csv",
    };
    let out = args.out.clone().unwrap_or_else(|| default_name.into());

    // The convergence kind runs training and never touches the methods.
    let methods = if cfg.experiment.kind == ExperimentKind::Convergence {
        Vec::new()
    } else {
        resolve_methods(&cfg.experiment, args.checkpoint.as_deref())?
    };
    let experiment = Experiment {
        scenario: &cfg.scenario,
        train: &cfg.train,
        baselines: &cfg.baselines,
        spec: &cfg.experiment,
        methods: &methods,
    };
    let csv = experiment.run()?;
    write_out(&out, &csv)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    match &Cli::parse().command {
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args, None),
        Command::Timing(args) => run_eval(args, Some(ExperimentKind::Timing)),
    }
}
