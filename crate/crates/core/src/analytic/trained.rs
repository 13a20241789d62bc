//! Pre-activation variance recurrence for trained networks, driven by weight
//! statistics and pre-activation densities instead of per-input means.

use serde::{Deserialize, Serialize};

use crate::density::{density_integrals, DensityModel};
use crate::error::{Error, Result};
use crate::network::{Network, WeightStats};
use crate::noise::NoiseConfig;

/// `mu(u)` and `eta(u)` over every entry of every input vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub mean: f64,
    pub mean_sq: f64,
}

pub fn input_summary(inputs: &[Vec<f64>]) -> Result<InputSummary> {
    let count: usize = inputs.iter().map(Vec::len).sum();
    if count == 0 {
        return Err(Error::InvalidArgument("input summary of an empty data set".into()));
    }
    let sum: f64 = inputs.iter().flatten().sum();
    let sum_sq: f64 = inputs.iter().flatten().map(|u| u * u).sum();
    Ok(InputSummary { mean: sum / count as f64, mean_sq: sum_sq / count as f64 })
}

/// `S_n` for layers `1..N` (entry `n - 1` belongs to 0-based layer `n`).
///
/// `densities[j]` is the pre-activation density of hidden layer `j + 1`; one is
/// required for every hidden layer. The first value uses the input summary in
/// place of density integrals and has no inherited term.
pub fn propagate_trained(
    net: &Network,
    stats: &WeightStats,
    densities: &[DensityModel],
    noise: &NoiseConfig,
    input: InputSummary,
) -> Result<Vec<f64>> {
    noise.validate()?;
    let layers = net.num_layers();
    if stats.layers.len() != layers - 1 {
        return Err(Error::Shape(format!("{} weight statistics for a {layers}-layer network", stats.layers.len())));
    }
    let hidden = layers - 2;
    if densities.len() < hidden {
        return Err(Error::MissingDensity(densities.len() + 1));
    }
    let s2x = noise.sigma2_mult();
    let two_cm = 2.0 * noise.d_mult_corr;
    let two_um = 2.0 * noise.d_mult_uncorr;

    let mut out = Vec::with_capacity(layers - 1);
    let (mut mean, mut mean_sq, mut slope_sq, mut s_prev) = (input.mean, input.mean_sq, 1.0, 0.0);
    for n in 1..layers {
        if n >= 2 {
            let ints = density_integrals(&densities[n - 2], net.activation(n - 1))?;
            mean = ints.mean_f;
            mean_sq = ints.mean_f_sq;
            slope_sq = ints.mean_fprime_sq;
        }
        let st = stats.layer(n);
        let s = st.shared_gain() * (2.0 * noise.d_add_corr + two_cm * mean * mean)
            + st.independent_gain() * (2.0 * noise.d_add_uncorr + two_um * (1.0 + two_cm) * mean_sq)
            + st.independent_gain() * (1.0 + s2x) * slope_sq * s_prev;
        if !s.is_finite() {
            return Err(Error::Numerical(format!("S is not finite at layer {}", n + 1)));
        }
        out.push(s);
        s_prev = s;
    }
    Ok(out)
}
