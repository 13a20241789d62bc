//! JSON experiment configuration. Every field is optional; command-line flags
//! are applied on top of the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dnn_noise::density::DensityKind;
use dnn_noise::train::{LossKind, MackeyGlassParams, TrainConfig};
use dnn_noise::{ActivationKind, NoiseConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkSource {
    /// Uniformly connected network with weights `1 / fan_in`.
    Symmetric { sizes: Vec<usize>, activation: ActivationKind },
    /// Network saved as JSON by `train` or by hand.
    Model { path: PathBuf },
}

/// Inputs fed to the network by `simulate`, `predict`, `compare` and
/// `fit-density`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    /// `t` evenly spaced scalars on `[0, 1]`, broadcast to every input neuron.
    Grid,
    /// Held-out 8x8 digit images.
    Digits,
    /// Held-out Mackey-Glass windows.
    MackeyGlass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Digits,
    MackeyGlass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to `[1, 200, 200, 1]` with a shifted sigmoid of slope 4, or to
    /// the 12-layer `[1, 200 x 10, 1]` stack for `lamerey`.
    pub network: Option<NetworkSource>,
    pub noise: NoiseConfig,
    /// Noisy repetitions per input.
    pub k: usize,
    /// Number of grid inputs.
    pub t: usize,
    /// Master seed of the Monte-Carlo streams and of weight initialization.
    pub seed: u64,
    /// Taylor order of the variance transfer.
    pub order: usize,
    /// Scalar input used for single-input budgets.
    pub probe: f64,
    /// Keep only points whose simulated mean lies in this range.
    pub mean_window: Option<(f64, f64)>,
    pub inputs: InputSource,
    pub density: DensityKind,
    /// 0-based layer for `compare` (default: output) and `fit-density`
    /// (default: 1).
    pub layer: Option<usize>,
    /// One value per line; `fit-density` reads this instead of a network.
    pub samples: Option<PathBuf>,
    pub alphas: Vec<f64>,
    pub task: Task,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub mackey_glass: MackeyGlassParams,
    /// Number of recorded Mackey-Glass samples.
    pub length: usize,
    pub window: usize,
    /// Samples held out at the end of a data set.
    pub test_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            network: None,
            noise: NoiseConfig { d_add_uncorr: 1e-4, d_add_corr: 1e-4, d_mult_uncorr: 1e-3, d_mult_corr: 1e-3 },
            k: 300,
            t: 1000,
            seed: 0,
            order: 3,
            probe: 0.5,
            mean_window: None,
            inputs: InputSource::Grid,
            density: DensityKind::QuarticExp,
            layer: None,
            samples: None,
            alphas: vec![1.5, 2.0, 3.0],
            task: Task::Digits,
            hidden: vec![100, 100],
            train: TrainConfig::default(),
            mackey_glass: MackeyGlassParams::default(),
            length: 3100,
            window: 100,
            test_size: 500,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn default_network() -> NetworkSource {
        NetworkSource::Symmetric {
            sizes: vec![1, 200, 200, 1],
            activation: ActivationKind::ShiftedSigmoid { alpha: 4.0 },
        }
    }

    pub fn default_deep_network() -> NetworkSource {
        let mut sizes = vec![1];
        sizes.extend([200; 10]);
        sizes.push(1);
        NetworkSource::Symmetric { sizes, activation: ActivationKind::ShiftedSigmoid { alpha: 2.0 } }
    }

    /// Loss implied by the training task.
    pub fn task_loss(&self) -> LossKind {
        match self.task {
            Task::Digits => LossKind::CrossEntropy,
            Task::MackeyGlass => LossKind::SquaredError,
        }
    }

    /// Checks fields that do not depend on the chosen command.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.noise.validate().map_err(|e| CliError::Config(format!("noise: {e}")))?;
        if self.t < 1 {
            return bad("t must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.probe) {
            return bad(format!("probe must lie in [0, 1], got {}", self.probe));
        }
        if let Some((lo, hi)) = self.mean_window {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return bad(format!("mean_window ({lo}, {hi}) is empty"));
            }
        }
        if let Some(NetworkSource::Model { path }) = &self.network {
            if !path.is_file() {
                return bad(format!("model file {} does not exist", path.display()));
            }
        }
        if let Some(path) = &self.samples {
            if !path.is_file() {
                return bad(format!("samples file {} does not exist", path.display()));
            }
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return bad(format!("alphas must be positive, got {:?}", self.alphas));
        }
        self.train.validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        Ok(())
    }
}
