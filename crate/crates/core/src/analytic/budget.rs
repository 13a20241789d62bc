//! Per-layer variance budgets from weight statistics and noiseless means.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{neuron_output_moments, transfer_variance};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::network::{weight_stats, LayerWeightStats, Network};
use crate::noise::NoiseConfig;

/// Noise budget of one layer (0-based `layer`; layer 0 is the input).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerNoiseBudget {
    pub layer: usize,
    /// `N^C`: fluctuations shared by every neuron of the previous layer.
    pub n_corr: f64,
    /// `N^U`: independent per-neuron fluctuations of the previous layer.
    pub n_uncorr: f64,
    /// `N^prev`: variance inherited from earlier layers through `f`.
    pub n_prev: f64,
    pub var_pre: f64,
    /// Layer average of the per-neuron output variance.
    pub var_post: f64,
    /// Layer average of the noiseless outputs.
    pub mean_post: f64,
    /// `S_n = N^U + N^prev`; the shared term is left out.
    pub s_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceTerms {
    pub n_corr: f64,
    pub n_uncorr: f64,
    pub n_prev: f64,
}

impl VarianceTerms {
    pub fn total(&self) -> f64 {
        self.n_corr + self.n_uncorr + self.n_prev
    }
}

/// Summary of the layer feeding a weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevLayerSummary {
    /// `mu(E(y))`, mean of the noiseless outputs over neurons.
    pub mean: f64,
    /// `eta(E(y))`, mean of their squares.
    pub mean_sq: f64,
    /// `mu(F(Var x~))`, mean variance of the noiseless outputs.
    pub transfer: f64,
}

impl PrevLayerSummary {
    pub fn from_layer(outputs: &[f64], transfers: &[f64]) -> Self {
        let n = outputs.len() as f64;
        PrevLayerSummary {
            mean: outputs.iter().sum::<f64>() / n,
            mean_sq: outputs.iter().map(|y| y * y).sum::<f64>() / n,
            transfer: transfers.iter().sum::<f64>() / transfers.len() as f64,
        }
    }
}

/// The three contributions to the pre-activation variance of a layer whose
/// weights have statistics `stats`.
pub fn preactivation_variance(stats: &LayerWeightStats, prev: &PrevLayerSummary, noise: &NoiseConfig) -> VarianceTerms {
    let shared = stats.shared_gain();
    let indep = stats.independent_gain();
    let two_cm = 2.0 * noise.d_mult_corr;
    let two_um = 2.0 * noise.d_mult_uncorr;
    VarianceTerms {
        n_corr: shared * (2.0 * noise.d_add_corr + two_cm * prev.mean * prev.mean),
        n_uncorr: indep * (2.0 * noise.d_add_uncorr + two_um * (1.0 + two_cm) * prev.mean_sq),
        n_prev: (shared + two_um * indep) * (1.0 + two_cm) * prev.transfer,
    }
}

fn checked_transfer(kind: ActivationKind, z: f64, var_pre: f64, order: usize, layer: usize) -> Result<f64> {
    let v = transfer_variance(kind, z, var_pre, order)?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Numerical(format!(
            "order-{order} variance estimate {v:e} is invalid in layer {} (pre-activation variance {var_pre:e}); \
             the Taylor series does not converge here, use a lower order",
            layer + 1
        )));
    }
    Ok(v)
}

/// Budgets for every layer of `net` driven by `input`, using layer-wide weight
/// statistics and the noiseless forward pass for all means.
pub fn propagate_budgets(
    net: &Network,
    input: &[f64],
    noise: &NoiseConfig,
    order: usize,
) -> Result<Vec<LayerNoiseBudget>> {
    noise.validate()?;
    let act = net.forward(input)?;
    let stats = weight_stats(net);

    let var_post0 = input.iter().map(|&u| neuron_output_moments(u, 0.0, noise).1).sum::<f64>() / input.len() as f64;
    let mut budgets = vec![LayerNoiseBudget {
        layer: 0,
        n_corr: 0.0,
        n_uncorr: 0.0,
        n_prev: 0.0,
        var_pre: 0.0,
        var_post: var_post0,
        mean_post: input.iter().sum::<f64>() / input.len() as f64,
        s_n: 0.0,
    }];
    let mut transfers = vec![0.0; input.len()];

    for n in 1..net.num_layers() {
        let prev = PrevLayerSummary::from_layer(&act.post[n - 1], &transfers);
        let terms = preactivation_variance(stats.layer(n), &prev, noise);
        let var_pre = terms.total();
        let kind = net.activation(n);
        transfers = act.pre[n].iter().map(|&z| checked_transfer(kind, z, var_pre, order, n)).collect::<Result<_>>()?;
        let outputs = &act.post[n];
        let var_post = outputs.iter().zip(&transfers).map(|(&m, &v)| neuron_output_moments(m, v, noise).1).sum::<f64>()
            / outputs.len() as f64;
        budgets.push(LayerNoiseBudget {
            layer: n,
            n_corr: terms.n_corr,
            n_uncorr: terms.n_uncorr,
            n_prev: terms.n_prev,
            var_pre,
            var_post,
            mean_post: outputs.iter().sum::<f64>() / outputs.len() as f64,
            s_n: terms.n_uncorr + terms.n_prev,
        });
    }
    Ok(budgets)
}

/// Budgets of a uniformly connected network for the scalar input `input`
/// (broadcast to every input neuron).
pub fn propagate_symmetric(
    net: &Network,
    input: f64,
    noise: &NoiseConfig,
    order: usize,
) -> Result<Vec<LayerNoiseBudget>> {
    if !net.is_symmetric() {
        return Err(Error::NotSymmetric(
            "every weight into layer n must equal 1/I_(n-1) and all biases must be zero".into(),
        ));
    }
    propagate_budgets(net, &vec![input; net.input_size()], noise, order)
}

/// `S_2, ..., S_(depth+1)` from `S_n = f'(m_(n-1))^2 S_(n-1)`, where
/// `mean_pre[j]` is the noiseless pre-activation mean of the layer feeding
/// `S_(j+3)`.
pub fn sn_sequence(kind: ActivationKind, mean_pre: &[f64], s2: f64, depth: usize) -> Result<Vec<f64>> {
    if !(s2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("S_2 must be non-negative, got {s2}")));
    }
    if depth == 0 {
        return Ok(Vec::new());
    }
    if mean_pre.len() + 1 < depth {
        return Err(Error::InvalidArgument(format!(
            "{} layer means cannot produce {depth} sequence values",
            mean_pre.len()
        )));
    }
    let mut out = Vec::with_capacity(depth);
    out.push(s2);
    for &m in &mean_pre[..depth - 1] {
        let slope = kind.slope(m);
        let next = slope * slope * out[out.len() - 1];
        out.push(next);
    }
    Ok(out)
}

/// One step of a cobweb diagram: `S_n` plotted against `S_(n-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LamereyPoint {
    /// 1-based layer number of `S_n`.
    pub n: usize,
    pub s_prev: f64,
    pub s_n: f64,
}

/// Consecutive pairs of `values`, where `values[0]` belongs to 1-based layer
/// `first_layer`.
pub fn lamerey_pairs(values: &[f64], first_layer: usize) -> Vec<LamereyPoint> {
    values
        .windows(2)
        .enumerate()
        .map(|(j, w)| LamereyPoint { n: first_layer + j + 1, s_prev: w[0], s_n: w[1] })
        .collect()
}

/// Columns `n, N_C, N_U, N_prev, var_pre, var_post, S_n` with 1-based `n`.
pub fn write_budget_csv<W: Write>(budgets: &[LayerNoiseBudget], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "N_C", "N_U", "N_prev", "var_pre", "var_post", "S_n"])?;
    for b in budgets {
        w.write_record([
            (b.layer + 1).to_string(),
            b.n_corr.to_string(),
            b.n_uncorr.to_string(),
            b.n_prev.to_string(),
            b.var_pre.to_string(),
            b.var_post.to_string(),
            b.s_n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `n, S_prev, S_n`.
pub fn write_lamerey_csv<W: Write>(points: &[LamereyPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "S_prev", "S_n"])?;
    for p in points {
        w.write_record([p.n.to_string(), p.s_prev.to_string(), p.s_n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
