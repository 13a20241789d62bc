//! Mini-batch backpropagation with Adam.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{argmax, Dataset};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{LayerSpec, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy per output; requires logistic outputs.
    CrossEntropy,
    /// `0.5 * sum (y - t)^2` per sample.
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
    pub train_biases: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            epochs: 50,
            loss: LossKind::CrossEntropy,
            seed: 0,
            train_biases: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be non-negative, got {}", self.learning_rate));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad(format!("adam_epsilon must be positive, got {}", self.adam_epsilon));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Weights uniform in `+-sqrt(6 / (I_in + I_out))`, zero biases. Hidden layers
/// use `hidden`, the last layer `output`.
pub fn init_network(sizes: &[usize], hidden: ActivationKind, output: ActivationKind, seed: u64) -> Result<Network> {
    if sizes.len() < 2 {
        return Err(Error::InvalidNetwork("need at least 2 layer sizes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = sizes.len() - 1;
    let mut layers =
        vec![LayerSpec { size: sizes[0], activation: ActivationKind::Identity, weights: None, biases: None }];
    for n in 1..sizes.len() {
        let (fan_in, fan_out) = (sizes[n - 1], sizes[n]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
        layers.push(LayerSpec {
            size: fan_out,
            activation: if n == last { output } else { hidden },
            weights: Some(Matrix::from_vec(fan_out, fan_in, data)?),
            biases: Some(vec![0.0; fan_out]),
        });
    }
    Network::new(layers)
}

/// Gradients for every layer `1..N` (entry 0 belongs to layer 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &Network) -> Self {
        Gradients {
            weights: (1..net.num_layers())
                .map(|n| Matrix::zeros(net.weights(n).rows(), net.weights(n).cols()))
                .collect(),
            biases: (1..net.num_layers()).map(|n| vec![0.0; net.layers()[n].size]).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v *= s);
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_loss(net: &Network, loss: LossKind) -> Result<()> {
    let out = net.activation(net.num_layers() - 1);
    if loss == LossKind::CrossEntropy && out != ActivationKind::StandardSigmoid {
        return Err(Error::InvalidArgument(format!("cross-entropy loss needs a logistic output layer, got {out:?}")));
    }
    Ok(())
}

fn check_shapes(net: &Network, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty data set".into()));
    }
    if data.input_dim() != net.input_size() || data.target_dim() != net.output_size() {
        return Err(Error::Shape(format!(
            "data is {}->{}, network is {}->{}",
            data.input_dim(),
            data.target_dim(),
            net.input_size(),
            net.output_size()
        )));
    }
    Ok(())
}

fn sample_loss(loss: LossKind, z: &[f64], y: &[f64], t: &[f64]) -> f64 {
    match loss {
        LossKind::SquaredError => 0.5 * y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
        // -t ln s(z) - (1 - t) ln(1 - s(z))
        LossKind::CrossEntropy => z.iter().zip(t).map(|(&z, &t)| t * softplus(-z) + (1.0 - t) * softplus(z)).sum(),
    }
}

/// Adds the gradient of one sample's loss to `grad` and returns the loss.
fn accumulate(net: &Network, loss: LossKind, x: &[f64], t: &[f64], grad: &mut Gradients) -> Result<f64> {
    let act = net.forward(x)?;
    let last = net.num_layers() - 1;
    let y = &act.post[last];
    let value = sample_loss(loss, &act.pre[last], y, t);

    let out_kind = net.activation(last);
    let mut delta: Vec<f64> = match loss {
        LossKind::CrossEntropy => y.iter().zip(t).map(|(a, b)| a - b).collect(),
        LossKind::SquaredError => {
            y.iter().zip(t).zip(&act.pre[last]).map(|((a, b), &z)| (a - b) * out_kind.slope(z)).collect()
        }
    };
    for n in (1..=last).rev() {
        let gw = &mut grad.weights[n - 1];
        let prev = &act.post[n - 1];
        for (i, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                gw.row_mut(i).iter_mut().zip(prev).for_each(|(g, &p)| *g += d * p);
            }
            grad.biases[n - 1][i] += d;
        }
        if n > 1 {
            let w = net.weights(n);
            let kind = net.activation(n - 1);
            let mut next = vec![0.0; w.cols()];
            for (i, &d) in delta.iter().enumerate() {
                next.iter_mut().zip(w.row(i)).for_each(|(s, &wij)| *s += d * wij);
            }
            next.iter_mut().zip(&act.pre[n - 1]).for_each(|(s, &z)| *s *= kind.slope(z));
            delta = next;
        }
    }
    Ok(value)
}

/// Mean loss and its gradient over `indices` of `data`.
pub fn batch_gradients(net: &Network, data: &Dataset, indices: &[usize], loss: LossKind) -> Result<(f64, Gradients)> {
    check_loss(net, loss)?;
    let mut grad = Gradients::zeros(net);
    let mut total = 0.0;
    for &k in indices {
        total += accumulate(net, loss, &data.inputs[k], &data.targets[k], &mut grad)?;
    }
    let inv = 1.0 / indices.len() as f64;
    grad.scale(inv);
    Ok((total * inv, grad))
}

/// Mean per-sample loss over the whole data set.
pub fn mean_loss(net: &Network, data: &Dataset, loss: LossKind) -> Result<f64> {
    check_loss(net, loss)?;
    let mut total = 0.0;
    for (x, t) in data.inputs.iter().zip(&data.targets) {
        let act = net.forward(x)?;
        let last = act.pre.len() - 1;
        total += sample_loss(loss, &act.pre[last], &act.post[last], t);
    }
    Ok(total / data.len() as f64)
}

struct Adam {
    m: Gradients,
    v: Gradients,
    step: i32,
}

impl Adam {
    fn new(net: &Network) -> Self {
        Adam { m: Gradients::zeros(net), v: Gradients::zeros(net), step: 0 }
    }

    fn update(&mut self, net: &mut Network, grad: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let step = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_epsilon);
        };
        for n in 1..net.num_layers() {
            let (w, b) = net.params_mut(n);
            let j = n - 1;
            for (((p, &g), m), v) in w
                .as_mut_slice()
                .iter_mut()
                .zip(grad.weights[j].as_slice())
                .zip(self.m.weights[j].as_mut_slice())
                .zip(self.v.weights[j].as_mut_slice())
            {
                step(p, g, m, v);
            }
            if cfg.train_biases {
                for (((p, &g), m), v) in
                    b.iter_mut().zip(&grad.biases[j]).zip(&mut self.m.biases[j]).zip(&mut self.v.biases[j])
                {
                    step(p, g, m, v);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Error rate (cross-entropy) or NRMSE (squared error) on the training
    /// data; NaN when undefined.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Network,
    pub history: Vec<EpochRecord>,
}

/// Trains a copy of `net`. The history holds one full-data evaluation per
/// epoch, preceded by the untrained state as epoch 0.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_shapes(net, data)?;
    check_loss(net, cfg.loss)?;
    let mut net = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let record = |net: &Network, epoch: usize| -> Result<EpochRecord> {
        let loss = mean_loss(net, data, cfg.loss)?;
        let error = evaluate(net, data, cfg.loss).map(|e| e.value()).unwrap_or(f64::NAN);
        Ok(EpochRecord { epoch, loss, error })
    };
    let mut history = vec![record(&net, 0)?];
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = batch_gradients(&net, data, batch, cfg.loss)?;
            adam.update(&mut net, &grad, cfg);
        }
        history.push(record(&net, epoch)?);
    }
    Ok(TrainOutcome { net, history })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "value", rename_all = "snake_case")]
pub enum Evaluation {
    ErrorRate(f64),
    Nrmse(f64),
}

impl Evaluation {
    pub fn value(&self) -> f64 {
        match *self {
            Evaluation::ErrorRate(v) | Evaluation::Nrmse(v) => v,
        }
    }
}

/// Classification error rate for cross-entropy, NRMSE for squared error.
pub fn evaluate(net: &Network, data: &Dataset, loss: LossKind) -> Result<Evaluation> {
    check_shapes(net, data)?;
    let outputs = data.inputs.iter().map(|x| net.predict(x)).collect::<Result<Vec<_>>>()?;
    match loss {
        LossKind::CrossEntropy => Ok(Evaluation::ErrorRate(error_rate(&outputs, &data.targets))),
        LossKind::SquaredError => nrmse(&outputs, &data.targets).map(Evaluation::Nrmse),
    }
}

/// Fraction of rows whose largest output differs from the largest target.
pub fn error_rate(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let wrong = outputs.iter().zip(targets).filter(|(y, t)| argmax(y) != argmax(t)).count();
    wrong as f64 / outputs.len() as f64
}

/// Root-mean-square error divided by the standard deviation of the targets.
pub fn nrmse(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let n = targets.iter().map(Vec::len).sum::<usize>() as f64;
    let mean = targets.iter().flatten().sum::<f64>() / n;
    let var = targets.iter().flatten().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Numerical("NRMSE is undefined for targets with zero variance".into()));
    }
    let mse = outputs.iter().flatten().zip(targets.iter().flatten()).map(|(y, t)| (y - t).powi(2)).sum::<f64>() / n;
    Ok((mse / var).sqrt())
}

/// Columns `epoch, loss, error`.
pub fn write_training_log<W: Write>(history: &[EpochRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "loss", "error"])?;
    for r in history {
        w.write_record([r.epoch.to_string(), r.loss.to_string(), r.error.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::weight_stats;
    use crate::train::dataset::{one_hot, Split};
    use crate::train::idx::digits;

    fn xor() -> Dataset {
        Dataset::new(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]],
            Split::Train,
        )
        .unwrap()
    }

    fn random_data(n: usize, inputs: usize, outputs: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..n).map(|_| (0..inputs).map(|_| rng.random::<f64>()).collect()).collect();
        let t = (0..n).map(|_| (0..outputs).map(|_| rng.random::<f64>()).collect()).collect();
        Dataset::new(x, t, Split::Train).unwrap()
    }

    fn finite_difference_check(loss: LossKind, output: ActivationKind) {
        let mut net = init_network(&[3, 4, 2], ActivationKind::StandardSigmoid, output, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 1..3 {
            let (_, b) = net.params_mut(n);
            b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let data = random_data(5, 3, 2, 13);
        let idx: Vec<usize> = (0..5).collect();
        let (_, grad) = batch_gradients(&net, &data, &idx, loss).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for n in 1..3 {
            let count = net.weights(n).as_slice().len() + net.biases(n).len();
            for p in 0..count {
                let poke = |net: &mut Network, delta: f64| {
                    let (w, b) = net.params_mut(n);
                    let nw = w.as_slice().len();
                    if p < nw {
                        w.as_mut_slice()[p] += delta;
                    } else {
                        b[p - nw] += delta;
                    }
                };
                poke(&mut net, h);
                let plus = batch_gradients(&net, &data, &idx, loss).unwrap().0;
                poke(&mut net, -2.0 * h);
                let minus = batch_gradients(&net, &data, &idx, loss).unwrap().0;
                poke(&mut net, h);
                let numeric = (plus - minus) / (2.0 * h);
                let nw = grad.weights[n - 1].as_slice().len();
                let analytic = if p < nw { grad.weights[n - 1].as_slice()[p] } else { grad.biases[n - 1][p - nw] };
                let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= 1e-5, "worst relative error {worst:e}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_difference_check(LossKind::SquaredError, ActivationKind::StandardSigmoid);
        finite_difference_check(LossKind::SquaredError, ActivationKind::Identity);
        finite_difference_check(LossKind::CrossEntropy, ActivationKind::StandardSigmoid);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let net =
            init_network(&[2, 8, 1], ActivationKind::StandardSigmoid, ActivationKind::StandardSigmoid, 1).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 5, loss: LossKind::SquaredError, ..Default::default() };
        let out = train(&net, &xor(), &cfg).unwrap();
        assert_eq!(out.net, net);
        assert!(out.history.windows(2).all(|w| w[0].loss == w[1].loss));
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut net = init_network(&[2, 3, 1], ActivationKind::StandardSigmoid, ActivationKind::Identity, 2).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net);
        let zero = Gradients::zeros(&net);
        for _ in 0..10 {
            adam.update(&mut net, &zero, &TrainConfig::default());
        }
        assert_eq!(net, before);
    }

    #[test]
    fn learns_xor() {
        let net =
            init_network(&[2, 8, 1], ActivationKind::StandardSigmoid, ActivationKind::StandardSigmoid, 3).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 2000,
            batch_size: 4,
            loss: LossKind::SquaredError,
            seed: 4,
            ..Default::default()
        };
        let out = train(&net, &xor(), &cfg).unwrap();
        let last = out.history.last().unwrap().loss;
        assert!(last < 0.01, "final loss {last}");
    }

    #[test]
    fn frozen_biases_and_determinism() {
        let (train_set, _) = digits().unwrap();
        let small =
            Dataset::new(train_set.inputs[..200].to_vec(), train_set.targets[..200].to_vec(), Split::Train).unwrap();
        let net =
            init_network(&[64, 20, 10], ActivationKind::StandardSigmoid, ActivationKind::StandardSigmoid, 5).unwrap();
        let cfg = TrainConfig { epochs: 3, seed: 9, train_biases: false, ..Default::default() };
        let a = train(&net, &small, &cfg).unwrap();
        let b = train(&net, &small, &cfg).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.net.biases(1), net.biases(1));
        assert_ne!(a.net.weights(1), net.weights(1));
        for s in weight_stats(&a.net).layers {
            assert!(s.mean.is_finite() && s.mean_sq > s.mean_squared());
        }
    }

    #[test]
    fn digits_reach_ten_percent() {
        let (train_set, test_set) = digits().unwrap();
        let net =
            init_network(&[64, 100, 100, 10], ActivationKind::StandardSigmoid, ActivationKind::StandardSigmoid, 7)
                .unwrap();
        let out = train(&net, &train_set, &TrainConfig { epochs: 50, seed: 8, ..Default::default() }).unwrap();
        let err = evaluate(&out.net, &test_set, LossKind::CrossEntropy).unwrap().value();
        assert!(err <= 0.10, "test error {err}");
    }

    #[test]
    fn evaluation_cases() {
        let targets = one_hot(&[0, 3, 9], 10);
        assert_eq!(error_rate(&targets, &targets), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let labels: Vec<u8> = (0..1000).map(|_| rng.random_range(0..10)).collect();
        let t = one_hot(&labels, 10);
        let y: Vec<Vec<f64>> = (0..1000).map(|_| (0..10).map(|_| rng.random::<f64>()).collect()).collect();
        let e = error_rate(&y, &t);
        assert!((e - 0.9).abs() <= 0.03, "{e}");

        let flat = vec![vec![0.3]; 5];
        assert!(nrmse(&flat, &flat).is_err());
        let t = vec![vec![0.0], vec![1.0]];
        assert!((nrmse(&[vec![0.5], vec![0.5]], &t).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_and_loss_errors() {
        let net = init_network(&[3, 2], ActivationKind::StandardSigmoid, ActivationKind::Identity, 0).unwrap();
        assert!(matches!(train(&net, &xor(), &TrainConfig::default()), Err(Error::Shape(_))));
        let net = init_network(&[2, 2, 1], ActivationKind::StandardSigmoid, ActivationKind::Identity, 0).unwrap();
        assert!(train(&net, &xor(), &TrainConfig::default()).is_err());
        let bad = TrainConfig { adam_beta1: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
