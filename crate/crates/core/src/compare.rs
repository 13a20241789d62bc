//! Joins analytic predictions with Monte-Carlo estimates.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::PredictedPoint;
use crate::error::{Error, Result};
use crate::sim::MonteCarloEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub t: usize,
    pub neuron: usize,
    pub mc_mean: f64,
    pub mc_variance: f64,
    pub pred_mean: f64,
    pub pred_variance: f64,
    /// `|pred_variance - mc_variance| / mc_variance`
    pub rel_err_variance: f64,
    /// Relative SNR error with both SNRs taken at the Monte-Carlo mean:
    /// `|sqrt(mc_variance / pred_variance) - 1|`.
    pub rel_err_snr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub n_points: usize,
    pub median_rel_err: f64,
    pub p95_rel_err: f64,
    pub median_snr_rel_err: f64,
    pub p95_snr_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub summary: CompareSummary,
}

/// Linear-interpolation quantile of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (pos - i as f64) * (v[j] - v[i])
}

/// Compares predictions for layer `layer` of `est`. Points whose Monte-Carlo
/// mean lies outside `mean_window` or whose Monte-Carlo variance is zero are
/// left out.
pub fn compare(
    predicted: &[PredictedPoint],
    est: &MonteCarloEstimate,
    layer: usize,
    mean_window: Option<(f64, f64)>,
) -> Result<Comparison> {
    let size = est.layers.get(layer).ok_or_else(|| Error::InvalidArgument(format!("layer {layer} out of range")))?.size;
    let mut rows = Vec::new();
    for p in predicted {
        if p.t >= est.num_inputs || p.neuron >= size {
            return Err(Error::Shape(format!("prediction ({}, {}) has no simulated counterpart", p.t, p.neuron)));
        }
        let mc_mean = est.mean(layer, p.t, p.neuron);
        let mc_variance = est.variance(layer, p.t, p.neuron);
        if let Some((lo, hi)) = mean_window {
            if !(lo..=hi).contains(&mc_mean) {
                continue;
            }
        }
        if !(mc_variance > 0.0) || !(p.variance > 0.0) {
            continue;
        }
        rows.push(CompareRow {
            t: p.t,
            neuron: p.neuron,
            mc_mean,
            mc_variance,
            pred_mean: p.mean,
            pred_variance: p.variance,
            rel_err_variance: (p.variance - mc_variance).abs() / mc_variance,
            rel_err_snr: ((mc_variance / p.variance).sqrt() - 1.0).abs(),
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no points left to compare".into()));
    }
    let var_err: Vec<f64> = rows.iter().map(|r| r.rel_err_variance).collect();
    let snr_err: Vec<f64> = rows.iter().map(|r| r.rel_err_snr).collect();
    let summary = CompareSummary {
        n_points: rows.len(),
        median_rel_err: quantile(&var_err, 0.5),
        p95_rel_err: quantile(&var_err, 0.95),
        median_snr_rel_err: quantile(&snr_err, 0.5),
        p95_snr_rel_err: quantile(&snr_err, 0.95),
    };
    Ok(Comparison { rows, summary })
}

/// Columns `t, neuron, mc_mean, mc_variance, pred_mean, pred_variance,
/// rel_err_variance, rel_err_snr`.
pub fn write_compare_csv<W: Write>(rows: &[CompareRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
