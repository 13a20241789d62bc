use crate::error::{Error, Result};

const MIN_BINS: usize = 10;
const MAX_BINS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins spanning `[min, max]` of the samples.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Fit(format!("histogram needs at least 2 samples, got {}", samples.len())));
        }
        if bins == 0 {
            return Err(Error::Fit("histogram needs at least one bin".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit("samples contain non-finite values".into()));
        }
        let (lo, hi) = min_max(samples);
        if lo == hi {
            return Err(Error::Fit(format!("all samples equal {lo}")));
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        edges[bins] = hi;
        let mut counts = vec![0u64; bins];
        for &v in samples {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.edges[0], self.edges[self.edges.len() - 1])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Probability of each bin.
    pub fn masses(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

fn min_max(samples: &[f64]) -> (f64, f64) {
    samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Freedman–Diaconis bin count, clamped to `[10, 200]`.
pub fn freedman_diaconis_bins(samples: &[f64]) -> usize {
    if samples.len() < 2 {
        return MIN_BINS;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let j = (i + 1).min(sorted.len() - 1);
        sorted[i] + frac * (sorted[j] - sorted[i])
    };
    let iqr = q(0.75) - q(0.25);
    let range = sorted[sorted.len() - 1] - sorted[0];
    if iqr <= 0.0 || range <= 0.0 {
        return MIN_BINS;
    }
    let width = 2.0 * iqr / (samples.len() as f64).cbrt();
    ((range / width).ceil() as usize).clamp(MIN_BINS, MAX_BINS)
}
