//! Closed-form layer-by-layer propagation of means and variances.

mod budget;
mod taylor;
mod trained;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::network::{weight_stats, Network};
use crate::noise::NoiseConfig;

pub use budget::{
    lamerey_pairs, preactivation_variance, propagate_budgets, propagate_symmetric, sn_sequence, write_budget_csv,
    write_lamerey_csv, LamereyPoint, LayerNoiseBudget, PrevLayerSummary, VarianceTerms,
};
pub use taylor::{first_order_f, gaussian_central_moments, taylor_f, TaylorMoments};
pub use trained::{input_summary, propagate_trained, InputSummary};

/// `(E y, Var y)` of a noisy neuron whose noiseless output `x` has mean
/// `mean_x` and variance `var_x`.
pub fn neuron_output_moments(mean_x: f64, var_x: f64, noise: &NoiseConfig) -> (f64, f64) {
    let s2x = noise.sigma2_mult();
    (mean_x, noise.sigma2_add() + s2x * mean_x * mean_x + (1.0 + s2x) * var_x)
}

/// Variance transfer `F(var_pre)` through `f`: first order for `order == 1`,
/// otherwise the order-`M` Gaussian Taylor estimate.
pub fn transfer_variance(kind: ActivationKind, mean_pre: f64, var_pre: f64, order: usize) -> Result<f64> {
    taylor_f(kind, mean_pre, var_pre, order)
}

/// Predicted output variance of a neuron with noiseless pre-activation `z`
/// and pre-activation variance `var_pre`.
pub fn predicted_neuron_variance(
    kind: ActivationKind,
    z: f64,
    var_pre: f64,
    noise: &NoiseConfig,
    order: usize,
) -> Result<f64> {
    let var_x = transfer_variance(kind, z, var_pre, order)?;
    Ok(neuron_output_moments(kind.apply(z), var_x, noise).1)
}

/// Predicted noiseless mean and noisy variance of one neuron for input `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedPoint {
    pub t: usize,
    pub neuron: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Output-layer predictions of a uniformly connected network for scalar inputs.
pub fn predict_symmetric_outputs(
    net: &Network,
    inputs: &[f64],
    noise: &NoiseConfig,
    order: usize,
) -> Result<Vec<PredictedPoint>> {
    let last = net.num_layers() - 1;
    let kind = net.activation(last);
    let mut points = Vec::with_capacity(inputs.len() * net.output_size());
    for (t, &u) in inputs.iter().enumerate() {
        let budgets = propagate_symmetric(net, u, noise, order)?;
        let var_pre = budgets[last].var_pre;
        let act = net.forward(&vec![u; net.input_size()])?;
        for (neuron, &z) in act.pre[last].iter().enumerate() {
            let variance = predicted_neuron_variance(kind, z, var_pre, noise, order)?;
            points.push(PredictedPoint { t, neuron, mean: kind.apply(z), variance });
        }
    }
    Ok(points)
}

/// Output-layer predictions of a trained network from the recurrence of
/// [`propagate_trained`]; returns the `S` sequence and one point per input
/// and output neuron.
pub fn predict_trained_outputs(
    net: &Network,
    inputs: &[Vec<f64>],
    densities: &[DensityModel],
    noise: &NoiseConfig,
) -> Result<(Vec<f64>, Vec<PredictedPoint>)> {
    let s = propagate_trained(net, &weight_stats(net), densities, noise, input_summary(inputs)?)?;
    let s_out = *s.last().ok_or_else(|| Error::InvalidNetwork("network has no output layer".into()))?;
    let last = net.num_layers() - 1;
    let kind = net.activation(last);
    let mut points = Vec::with_capacity(inputs.len() * net.output_size());
    for (t, x) in inputs.iter().enumerate() {
        let act = net.forward(x)?;
        for (neuron, &z) in act.pre[last].iter().enumerate() {
            let variance = predicted_neuron_variance(kind, z, s_out, noise, 1)?;
            points.push(PredictedPoint { t, neuron, mean: kind.apply(z), variance });
        }
    }
    Ok((s, points))
}
