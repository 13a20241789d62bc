//! One runner per subcommand. Written artifact names accumulate in `Runner::written`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::Serialize;

use dnn_noise::analytic::{
    lamerey_pairs, predict_symmetric_outputs, predict_trained_outputs, propagate_budgets, propagate_symmetric,
    write_budget_csv, write_lamerey_csv, PredictedPoint,
};
use dnn_noise::compare::{compare, write_compare_csv, CompareSummary};
use dnn_noise::density::{collect_preactivations, fit_layer_densities, write_histogram_csv, DensityKind, Histogram};
use dnn_noise::sim::estimate;
use dnn_noise::train::{
    digits, evaluate, init_network, mackey_glass, train, windowize, write_training_log, Dataset, Evaluation,
};
use dnn_noise::{make_symmetric, weight_stats, ActivationKind, Network, WeightStats};

use crate::config::{ExperimentConfig, InputSource, NetworkSource, Task};
use crate::error::{io_err, CliError, CliResult, Context};

pub struct Runner<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: &'a Path,
    pub written: Vec<String>,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a ExperimentConfig, out: &'a Path) -> Self {
        Runner { cfg, out, written: Vec::new() }
    }

    fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let w = self.create(name)?;
        serde_json::to_writer_pretty(w, value).map_err(|e| io_err(&self.out.join(name), e))
    }

    fn source(&self) -> NetworkSource {
        self.cfg.network.clone().unwrap_or_else(ExperimentConfig::default_network)
    }

    fn network(&self) -> CliResult<Network> {
        match self.source() {
            NetworkSource::Symmetric { sizes, activation } => make_symmetric(&sizes, activation).ctx("network"),
            NetworkSource::Model { path } => Network::load(&path).ctx(&format!("model {}", path.display())),
        }
    }

    /// Held-out split for a data-set input source.
    fn held_out(&self, source: InputSource) -> CliResult<Dataset> {
        match source {
            InputSource::Digits => Ok(digits().ctx("digits")?.1),
            InputSource::MackeyGlass => Ok(self.mackey_glass_data()?.1),
            InputSource::Grid => Err(CliError::Config("grid inputs have no data set".into())),
        }
    }

    fn mackey_glass_data(&self) -> CliResult<(Dataset, Dataset)> {
        let c = self.cfg;
        let series = mackey_glass(&c.mackey_glass, c.length).ctx("mackey-glass")?;
        windowize(&series.scaled, c.window)
            .ctx("mackey-glass windows")?
            .split_tail(c.test_size)
            .ctx("mackey-glass split")
    }

    fn grid(&self) -> Vec<f64> {
        let t = self.cfg.t;
        if t == 1 {
            return vec![self.cfg.probe];
        }
        (0..t).map(|i| i as f64 / (t - 1) as f64).collect()
    }

    fn inputs(&self, net: &Network) -> CliResult<Vec<Vec<f64>>> {
        let rows = match self.cfg.inputs {
            InputSource::Grid => self.grid().into_iter().map(|u| vec![u; net.input_size()]).collect(),
            source => self.held_out(source)?.inputs,
        };
        if let Some(row) = rows.first() {
            if row.len() != net.input_size() {
                return Err(CliError::Config(format!(
                    "inputs have {} entries but the network expects {}",
                    row.len(),
                    net.input_size()
                )));
            }
        }
        Ok(rows)
    }

    /// Output-layer predictions: per-input budgets for symmetric networks on
    /// the grid, the density-based recurrence otherwise.
    fn predictions(&self, net: &Network, inputs: &[Vec<f64>]) -> CliResult<(Vec<PredictedPoint>, Option<Vec<f64>>)> {
        let c = self.cfg;
        if net.is_symmetric() && c.inputs == InputSource::Grid {
            let grid = self.grid();
            return Ok((predict_symmetric_outputs(net, &grid, &c.noise, c.order).ctx("prediction")?, None));
        }
        let dens = fit_layer_densities(net, inputs, c.density).ctx("density fit")?;
        let (s, points) = predict_trained_outputs(net, inputs, &dens, &c.noise).ctx("prediction")?;
        Ok((points, Some(s)))
    }

    pub fn simulate(&mut self) -> CliResult<()> {
        let c = self.cfg;
        if c.k < 2 {
            return Err(CliError::Config(format!("simulate needs k >= 2, got {}", c.k)));
        }
        let net = self.network()?;
        let inputs = self.inputs(&net)?;
        let est = estimate(&net, &inputs, &c.noise, c.k, c.seed).ctx("simulation")?;
        for n in 0..net.num_layers() {
            let w = self.create(&format!("layer_{n}.csv"))?;
            est.write_layer_csv(n, w).ctx("layer csv")?;
        }
        Ok(())
    }

    pub fn predict(&mut self) -> CliResult<()> {
        let c = self.cfg;
        let net = self.network()?;
        let inputs = self.inputs(&net)?;
        let probe = match c.inputs {
            InputSource::Grid => vec![c.probe; net.input_size()],
            _ => inputs[0].clone(),
        };
        let budgets = propagate_budgets(&net, &probe, &c.noise, c.order).ctx("noise budget")?;
        write_budget_csv(&budgets, self.create("budget.csv")?).ctx("budget csv")?;

        let (points, s) = self.predictions(&net, &inputs)?;
        let mut w = csv_writer(self.create("predicted_snr.csv")?);
        w.write_record(["t", "neuron", "mean", "variance", "snr"]).map_err(csv_err)?;
        for p in &points {
            let snr = if p.variance > 0.0 { (p.mean / p.variance.sqrt()).to_string() } else { String::new() };
            w.write_record([p.t.to_string(), p.neuron.to_string(), p.mean.to_string(), p.variance.to_string(), snr])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = s {
            let mut w = csv_writer(self.create("trained_s.csv")?);
            w.write_record(["n", "S_n"]).map_err(csv_err)?;
            for (j, v) in s.iter().enumerate() {
                w.write_record([(j + 1).to_string(), v.to_string()]).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn compare(&mut self) -> CliResult<()> {
        #[derive(Serialize)]
        struct Summary {
            layer: usize,
            density: Option<DensityKind>,
            #[serde(flatten)]
            summary: CompareSummary,
        }

        let c = self.cfg;
        if c.k < 2 {
            return Err(CliError::Config(format!("compare needs k >= 2, got {}", c.k)));
        }
        let net = self.network()?;
        let last = net.num_layers() - 1;
        if c.layer.is_some_and(|l| l != last) {
            return Err(CliError::Config(format!("predictions exist for the output layer {last} only")));
        }
        let inputs = self.inputs(&net)?;
        let est = estimate(&net, &inputs, &c.noise, c.k, c.seed).ctx("simulation")?;
        let (points, s) = self.predictions(&net, &inputs)?;
        let cmp = compare(&points, &est, last, c.mean_window).ctx("comparison")?;
        write_compare_csv(&cmp.rows, self.create("compare.csv")?).ctx("compare csv")?;
        let summary = Summary { layer: last, density: s.map(|_| c.density), summary: cmp.summary };
        self.write_json("summary.json", &summary)
    }

    pub fn lamerey(&mut self) -> CliResult<()> {
        let c = self.cfg;
        let sizes = match c.network.clone().unwrap_or_else(ExperimentConfig::default_deep_network) {
            NetworkSource::Symmetric { sizes, .. } => sizes,
            NetworkSource::Model { .. } => {
                return Err(CliError::Config("lamerey needs a symmetric network".into()));
            }
        };
        for &alpha in &c.alphas {
            let net = make_symmetric(&sizes, ActivationKind::ShiftedSigmoid { alpha }).ctx("network")?;
            let budgets = propagate_symmetric(&net, c.probe, &c.noise, c.order).ctx(&format!("alpha {alpha}"))?;
            // S_n starts at the first hidden layer (1-based layer 2).
            let s: Vec<f64> = budgets[1..].iter().map(|b| b.s_n).collect();
            let w = self.create(&format!("lamerey_alpha_{alpha}.csv"))?;
            write_lamerey_csv(&lamerey_pairs(&s, 2), w).ctx("lamerey csv")?;
        }
        Ok(())
    }

    pub fn train(&mut self) -> CliResult<()> {
        #[derive(Serialize)]
        struct Stats {
            task: Task,
            sizes: Vec<usize>,
            train_size: usize,
            test_size: usize,
            final_loss: f64,
            test: Evaluation,
            weights: WeightStats,
        }

        let c = self.cfg;
        let (train_set, test_set, output) = match c.task {
            Task::Digits => {
                let (tr, te) = digits().ctx("digits")?;
                (tr, te, ActivationKind::StandardSigmoid)
            }
            Task::MackeyGlass => {
                let (tr, te) = self.mackey_glass_data()?;
                (tr, te, ActivationKind::Identity)
            }
        };
        let mut sizes = vec![train_set.input_dim()];
        sizes.extend(&c.hidden);
        sizes.push(train_set.target_dim());
        let init = init_network(&sizes, ActivationKind::StandardSigmoid, output, c.seed).ctx("initialization")?;
        let train_cfg = dnn_noise::train::TrainConfig { loss: c.task_loss(), ..c.train };
        let outcome = train(&init, &train_set, &train_cfg).ctx("training")?;
        let net = outcome.net;
        let test = evaluate(&net, &test_set, train_cfg.loss).ctx("evaluation")?;

        let model = self.out.join("model.json");
        net.save(&model).ctx("model json")?;
        self.written.push("model.json".into());
        write_training_log(&outcome.history, self.create("training_log.csv")?).ctx("training log")?;
        let stats = Stats {
            task: c.task,
            sizes,
            train_size: train_set.len(),
            test_size: test_set.len(),
            final_loss: outcome.history.last().map_or(f64::NAN, |r| r.loss),
            test,
            weights: weight_stats(&net),
        };
        self.write_json("stats.json", &stats)
    }

    pub fn fit_density(&mut self) -> CliResult<()> {
        let c = self.cfg;
        let samples = match &c.samples {
            Some(path) => read_samples(path)?,
            None => {
                let net = self.network()?;
                let layer = c.layer.unwrap_or(1);
                if layer == 0 || layer >= net.num_layers() {
                    return Err(CliError::Config(format!("layer must be in 1..{}, got {layer}", net.num_layers())));
                }
                let inputs = self.inputs(&net)?;
                collect_preactivations(&net, &inputs).ctx("pre-activations")?.swap_remove(layer)
            }
        };
        let model = c.density.fit(&samples).ctx("density fit")?;
        let hist =
            Histogram::from_samples(&samples, dnn_noise::density::freedman_diaconis_bins(&samples)).ctx("histogram")?;
        self.write_json("density.json", &model.to_export())?;
        write_histogram_csv(&hist, self.create("histogram.csv")?).ctx("histogram csv")
    }

    pub fn mackey_glass(&mut self) -> CliResult<()> {
        let c = self.cfg;
        let series = mackey_glass(&c.mackey_glass, c.length).ctx("mackey-glass")?;
        let step = c.mackey_glass.dt * c.mackey_glass.sample_every as f64;
        let mut w = csv_writer(self.create("series.csv")?);
        w.write_record(["index", "time", "value", "scaled"]).map_err(csv_err)?;
        for (i, (raw, scaled)) in series.raw.iter().zip(&series.scaled).enumerate() {
            w.write_record([i.to_string(), ((i + 1) as f64 * step).to_string(), raw.to_string(), scaled.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::Config(e.to_string()))
    }
}

fn csv_writer(w: BufWriter<File>) -> csv::Writer<BufWriter<File>> {
    csv::Writer::from_writer(w)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Config(format!("csv: {e}"))
}

/// Reads one number per line, skipping blank lines and a non-numeric header.
fn read_samples(path: &PathBuf) -> CliResult<Vec<f64>> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(CliError::Config(format!("{}:{}: not a number: {field}", path.display(), i + 1)));
            }
        }
    }
    Ok(values)
}
