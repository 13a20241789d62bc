//! Monte-Carlo simulation of networks built from noisy neurons.
//!
//! Each neuron output is perturbed as
//! `y = sqrt(2 D^U_A) xi^{U,A}_i + sqrt(2 D^C_A) xi^{C,A} + x (1 + sqrt(2 D^U_M) xi^{U,M}_i)(1 + sqrt(2 D^C_M) xi^{C,M})`,
//! where the correlated draws are shared by all neurons of a layer within one
//! evaluation. Noise acts on every layer, the input and output layers included.

mod rng;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::noise::NoiseConfig;

pub use rng::{splitmix64, StreamKey};

/// Per-layer state of one noisy forward pass.
#[derive(Debug, Clone)]
pub struct NoisyPass {
    /// Pre-activations `x~_n` (layer 0 holds the input).
    pub pre: Vec<Vec<f64>>,
    /// Noisy outputs `y_n`.
    pub out: Vec<Vec<f64>>,
}

impl NoisyPass {
    fn for_network(net: &Network) -> Self {
        let sizes = net.sizes();
        NoisyPass {
            pre: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            out: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }
}

#[derive(Clone, Copy)]
struct Amplitudes {
    add_uncorr: f64,
    add_corr: f64,
    mult_uncorr: f64,
    mult_corr: f64,
}

impl From<&NoiseConfig> for Amplitudes {
    fn from(n: &NoiseConfig) -> Self {
        Amplitudes {
            add_uncorr: (2.0 * n.d_add_uncorr).sqrt(),
            add_corr: (2.0 * n.d_add_corr).sqrt(),
            mult_uncorr: (2.0 * n.d_mult_uncorr).sqrt(),
            mult_corr: (2.0 * n.d_mult_corr).sqrt(),
        }
    }
}

/// Applies `f` and the noise operator to `pre`, writing `out`. Draw order per
/// layer: correlated additive, correlated multiplicative, then for each neuron
/// uncorrelated additive followed by uncorrelated multiplicative. Sources with
/// zero intensity draw nothing.
fn apply_noise<R: Rng>(
    pre: &[f64],
    out: &mut [f64],
    f: crate::activation::ActivationKind,
    amp: Amplitudes,
    rng: &mut R,
) {
    let corr_add = if amp.add_corr > 0.0 { amp.add_corr * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
    let corr_mult = if amp.mult_corr > 0.0 { 1.0 + amp.mult_corr * rng.sample::<f64, _>(StandardNormal) } else { 1.0 };
    for (y, &xt) in out.iter_mut().zip(pre) {
        let x = f.apply(xt);
        let add = if amp.add_uncorr > 0.0 { amp.add_uncorr * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        let mult =
            if amp.mult_uncorr > 0.0 { 1.0 + amp.mult_uncorr * rng.sample::<f64, _>(StandardNormal) } else { 1.0 };
        *y = add + corr_add + x * mult * corr_mult;
    }
}

fn check_finite(values: &[f64], layer: usize) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(neuron) => Err(Error::NonFinite { layer, neuron }),
        None => Ok(()),
    }
}

fn run_pass(net: &Network, input: &[f64], amp: Amplitudes, key: StreamKey, pass: &mut NoisyPass) -> Result<()> {
    pass.pre[0].copy_from_slice(input);
    for n in 0..net.num_layers() {
        if n > 0 {
            net.weights(n).affine_into(&pass.out[n - 1], net.biases(n), &mut pass.pre[n]);
            check_finite(&pass.pre[n], n)?;
        }
        let mut rng = key.layer_rng(n);
        apply_noise(&pass.pre[n], &mut pass.out[n], net.activation(n), amp, &mut rng);
        check_finite(&pass.out[n], n)?;
    }
    Ok(())
}

/// One noisy forward pass, with noise drawn from the substreams of `key`.
pub fn forward_noisy(net: &Network, input: &[f64], noise: &NoiseConfig, key: StreamKey) -> Result<NoisyPass> {
    net.check_input(input)?;
    noise.validate()?;
    let mut pass = NoisyPass::for_network(net);
    run_pass(net, input, Amplitudes::from(noise), key, &mut pass)?;
    Ok(pass)
}

/// Running mean/variance accumulator (Welford).
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(size: usize) -> Self {
        Moments { count: 0.0, mean: vec![0.0; size], m2: vec![0.0; size] }
    }

    fn push(&mut self, values: &[f64]) {
        self.count += 1.0;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = x - *m;
            *m += delta / self.count;
            *s += delta * (x - *m);
        }
    }

    fn variance(&self) -> Vec<f64> {
        self.m2.iter().map(|s| s / (self.count - 1.0)).collect()
    }
}

/// Per-neuron statistics of one layer, stored row-major over `(t, neuron)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEstimate {
    pub size: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub pre_mean: Vec<f64>,
    pub pre_variance: Vec<f64>,
}

/// Monte-Carlo estimate of neuron output moments over `k` noisy repetitions
/// of each input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub k: usize,
    pub master_seed: u64,
    pub num_inputs: usize,
    pub layers: Vec<LayerEstimate>,
}

impl MonteCarloEstimate {
    fn idx(&self, n: usize, t: usize, i: usize) -> usize {
        t * self.layers[n].size + i
    }

    pub fn mean(&self, n: usize, t: usize, i: usize) -> f64 {
        self.layers[n].mean[self.idx(n, t, i)]
    }

    pub fn variance(&self, n: usize, t: usize, i: usize) -> f64 {
        self.layers[n].variance[self.idx(n, t, i)]
    }

    pub fn pre_variance(&self, n: usize, t: usize, i: usize) -> f64 {
        self.layers[n].pre_variance[self.idx(n, t, i)]
    }

    /// `E(y) / sqrt(Var(y))`, or `None` when the variance is zero.
    pub fn snr(&self, n: usize, t: usize, i: usize) -> Option<f64> {
        snr(self.mean(n, t, i), self.variance(n, t, i))
    }

    /// Neuron-averaged pre-activation variance of layer `n` for input `t`.
    pub fn mean_pre_variance(&self, n: usize, t: usize) -> f64 {
        let size = self.layers[n].size;
        let row = &self.layers[n].pre_variance[t * size..(t + 1) * size];
        row.iter().sum::<f64>() / size as f64
    }

    /// Writes `t, neuron, mean, variance, snr` rows for layer `n`; the snr
    /// field is empty when undefined.
    pub fn write_layer_csv<W: Write>(&self, n: usize, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "neuron", "mean", "variance", "snr"])?;
        let size = self.layers[n].size;
        for t in 0..self.num_inputs {
            for i in 0..size {
                let snr = self.snr(n, t, i).map(|s| s.to_string()).unwrap_or_default();
                w.write_record([
                    t.to_string(),
                    i.to_string(),
                    self.mean(n, t, i).to_string(),
                    self.variance(n, t, i).to_string(),
                    snr,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn snr(mean: f64, variance: f64) -> Option<f64> {
    (variance > 0.0).then(|| mean / variance.sqrt())
}

/// Runs `k` noisy passes for every input and returns per-neuron moments.
///
/// Inputs are processed in parallel; repetitions of one input are accumulated
/// sequentially, so results are bit-identical for any thread count.
pub fn estimate(
    net: &Network,
    inputs: &[Vec<f64>],
    noise: &NoiseConfig,
    k: usize,
    master_seed: u64,
) -> Result<MonteCarloEstimate> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 repetitions for a variance, got K={k}")));
    }
    noise.validate()?;
    for input in inputs {
        net.check_input(input)?;
    }
    let amp = Amplitudes::from(noise);
    let sizes = net.sizes();

    let per_input: Vec<Vec<(Moments, Moments)>> = inputs
        .par_iter()
        .enumerate()
        .map(|(t, input)| {
            let mut pass = NoisyPass::for_network(net);
            let mut acc: Vec<(Moments, Moments)> = sizes.iter().map(|&s| (Moments::new(s), Moments::new(s))).collect();
            for rep in 0..k {
                run_pass(net, input, amp, StreamKey::new(master_seed, t as u64, rep as u64), &mut pass)?;
                for (n, (pre, out)) in acc.iter_mut().enumerate() {
                    pre.push(&pass.pre[n]);
                    out.push(&pass.out[n]);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let layers = sizes
        .iter()
        .enumerate()
        .map(|(n, &size)| {
            let mut layer = LayerEstimate {
                size,
                mean: Vec::with_capacity(size * inputs.len()),
                variance: Vec::with_capacity(size * inputs.len()),
                pre_mean: Vec::with_capacity(size * inputs.len()),
                pre_variance: Vec::with_capacity(size * inputs.len()),
            };
            for acc in &per_input {
                let (pre, out) = &acc[n];
                layer.mean.extend_from_slice(&out.mean);
                layer.variance.extend(out.variance());
                layer.pre_mean.extend_from_slice(&pre.mean);
                layer.pre_variance.extend(pre.variance());
            }
            layer
        })
        .collect();

    Ok(MonteCarloEstimate { k, master_seed, num_inputs: inputs.len(), layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub t: usize,
    pub neuron: usize,
    pub mean: f64,
    pub snr: f64,
}

/// Scatter of (mean, SNR) for one layer; points with undefined SNR are
/// dropped and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCurve {
    pub points: Vec<SnrPoint>,
    pub omitted: usize,
}

pub fn snr_curve(est: &MonteCarloEstimate, layer: usize) -> Result<SnrCurve> {
    if layer >= est.layers.len() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range for a {}-layer estimate",
            est.layers.len()
        )));
    }
    let size = est.layers[layer].size;
    let mut points = Vec::new();
    let mut omitted = 0;
    for t in 0..est.num_inputs {
        for i in 0..size {
            match est.snr(layer, t, i) {
                Some(snr) => points.push(SnrPoint { t, neuron: i, mean: est.mean(layer, t, i), snr }),
                None => omitted += 1,
            }
        }
    }
    Ok(SnrCurve { points, omitted })
}
