//! Experiment runner: wires a JSON config to the simulation, prediction,
//! training and density-fitting code and writes CSV/JSON artifacts plus a
//! `manifest.json` per run.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dnn_noise::density::DensityKind;

use crate::commands::Runner;
use crate::config::{ExperimentConfig, InputSource, NetworkSource, Task};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "dnn-noise", version, about = "Noise propagation experiments for networks of noisy neurons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    Simulate,
    Predict,
    Compare,
    Lamerey,
    Train,
    FitDensity,
    MackeyGlass,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo means, variances and SNRs of every layer.
    Simulate(Common),
    /// Analytic noise budget and predicted output SNR.
    Predict(Common),
    /// Simulation and prediction joined, with error summary.
    Compare(Common),
    /// (S_prev, S_n) pairs for each slope in `alphas`.
    Lamerey(Common),
    /// Train a classifier on digits or a Mackey-Glass predictor.
    Train(Common),
    /// Fit a pre-activation density and its histogram.
    FitDensity(Common),
    /// Generate a Mackey-Glass series.
    MackeyGlass(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Empirical,
    Normal,
    Uniform,
    QuarticExp,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Grid,
    Digits,
    MackeyGlass,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Noisy repetitions per input.
    #[arg(long)]
    k: Option<usize>,
    /// Number of grid inputs.
    #[arg(long)]
    t: Option<usize>,
    /// Taylor order of the variance transfer.
    #[arg(long)]
    order: Option<usize>,
    /// Network JSON to use instead of a symmetric network.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    inputs: Option<InputArg>,
    #[arg(long, value_enum)]
    density: Option<DensityArg>,
    #[arg(long)]
    layer: Option<usize>,
    /// One value per line, for fit-density.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Comma-separated slopes, for lamerey.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// digits or mackey-glass, for train.
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Digits,
    MackeyGlass,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    outputs: &'a [String],
}

impl Common {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.t {
            cfg.t = v;
        }
        if let Some(v) = self.order {
            cfg.order = v;
        }
        if let Some(path) = &self.model {
            cfg.network = Some(NetworkSource::Model { path: path.clone() });
        }
        if let Some(v) = self.inputs {
            cfg.inputs = match v {
                InputArg::Grid => InputSource::Grid,
                InputArg::Digits => InputSource::Digits,
                InputArg::MackeyGlass => InputSource::MackeyGlass,
            };
        }
        if let Some(v) = self.density {
            cfg.density = match v {
                DensityArg::Empirical => DensityKind::Empirical,
                DensityArg::Normal => DensityKind::Normal,
                DensityArg::Uniform => DensityKind::Uniform,
                DensityArg::QuarticExp => DensityKind::QuarticExp,
            };
        }
        if let Some(v) = self.layer {
            cfg.layer = Some(v);
        }
        if let Some(path) = &self.samples {
            cfg.samples = Some(path.clone());
        }
        if let Some(v) = &self.alphas {
            cfg.alphas = v.clone();
        }
        if let Some(v) = self.task {
            cfg.task = match v {
                TaskArg::Digits => Task::Digits,
                TaskArg::MackeyGlass => Task::MackeyGlass,
            };
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(name: &str, common: &Common, kind: CommandKind) -> CliResult<()> {
    let mut cfg = common.resolve()?;
    // Record the implied defaults so the manifest alone reproduces the run.
    match kind {
        CommandKind::Train => cfg.train.loss = cfg.task_loss(),
        CommandKind::Lamerey => {
            cfg.network.get_or_insert_with(ExperimentConfig::default_deep_network);
        }
        CommandKind::Simulate | CommandKind::Predict | CommandKind::Compare => {
            cfg.network.get_or_insert_with(ExperimentConfig::default_network);
        }
        CommandKind::FitDensity if cfg.samples.is_none() => {
            cfg.network.get_or_insert_with(ExperimentConfig::default_network);
        }
        CommandKind::FitDensity | CommandKind::MackeyGlass => {}
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", common.out.display())))?;
    let mut runner = Runner::new(&cfg, &common.out);
    match kind {
        CommandKind::Simulate => runner.simulate(),
        CommandKind::Predict => runner.predict(),
        CommandKind::Compare => runner.compare(),
        CommandKind::Lamerey => runner.lamerey(),
        CommandKind::Train => runner.train(),
        CommandKind::FitDensity => runner.fit_density(),
        CommandKind::MackeyGlass => runner.mackey_glass(),
    }?;
    let mut outputs = runner.written;
    outputs.push("manifest.json".into());
    let manifest =
        Manifest { command: name, version: env!("CARGO_PKG_VERSION"), seed: cfg.seed, config: &cfg, outputs: &outputs };
    let path = common.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| error::io_err(&path, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, kind) = match &cli.command {
        Command::Simulate(c) => ("simulate", c, CommandKind::Simulate),
        Command::Predict(c) => ("predict", c, CommandKind::Predict),
        Command::Compare(c) => ("compare", c, CommandKind::Compare),
        Command::Lamerey(c) => ("lamerey", c, CommandKind::Lamerey),
        Command::Train(c) => ("train", c, CommandKind::Train),
        Command::FitDensity(c) => ("fit-density", c, CommandKind::FitDensity),
        Command::MackeyGlass(c) => ("mackey-glass", c, CommandKind::MackeyGlass),
    };
    match run(name, common, kind) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dnn-noise {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
