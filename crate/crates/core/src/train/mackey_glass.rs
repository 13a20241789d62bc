//! Mackey–Glass delay differential equation
//! `dx/dt = beta x(t - tau) / (1 + x(t - tau)^n) - gamma x(t)`.

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MackeyGlassParams {
    pub beta: f64,
    pub gamma: f64,
    pub exponent: f64,
    pub tau: f64,
    pub dt: f64,
    pub history: f64,
    /// Integration steps discarded before recording.
    pub warmup_steps: usize,
    /// Integration steps between recorded samples.
    pub sample_every: usize,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        MackeyGlassParams {
            beta: 0.2,
            gamma: 0.1,
            exponent: 10.0,
            tau: 17.0,
            dt: 0.1,
            history: 1.2,
            warmup_steps: 5000,
            sample_every: 10,
        }
    }
}

impl MackeyGlassParams {
    fn delay_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        let ratio = self.tau / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau/dt must be a positive integer, got {} / {}",
                self.tau, self.dt
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidArgument("sample_every must be at least 1".into()));
        }
        Ok(steps as usize)
    }
}

/// Recorded trajectory before and after rescaling to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MackeyGlassSeries {
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

/// Integrates with RK4 and records `length` samples after the warmup.
pub fn mackey_glass(params: &MackeyGlassParams, length: usize) -> Result<MackeyGlassSeries> {
    let delay = params.delay_steps()?;
    let (beta, gamma, n, dt) = (params.beta, params.gamma, params.exponent, params.dt);
    let rhs = |x: f64, xd: f64| beta * xd / (1.0 + xd.powf(n)) - gamma * x;

    // history[j] holds x at step j - delay; index `delay` is the current state.
    let total = params.warmup_steps + length * params.sample_every;
    let mut xs = Vec::with_capacity(delay + total + 1);
    xs.resize(delay + 1, params.history);
    let mut raw = Vec::with_capacity(length);
    for step in 0..total {
        let i = delay + step;
        let x = xs[i];
        // Delayed values at t - tau, t - tau + dt/2, t - tau + dt.
        let d0 = xs[i - delay];
        let d1 = xs[i - delay + 1];
        let dh = 0.5 * (d0 + d1);
        let k1 = rhs(x, d0);
        let k2 = rhs(x + 0.5 * dt * k1, dh);
        let k3 = rhs(x + 0.5 * dt * k2, dh);
        let k4 = rhs(x + dt * k3, d1);
        let next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Numerical(format!("Mackey-Glass state became {next} at step {step}")));
        }
        xs.push(next);
        let done = step + 1;
        if done > params.warmup_steps && (done - params.warmup_steps).is_multiple_of(params.sample_every) {
            raw.push(next);
        }
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let scaled = raw.iter().map(|&x| if span > 0.0 { (x - min) / span } else { 0.5 }).collect();
    Ok(MackeyGlassSeries { raw, scaled, min, max })
}

/// Sliding windows of `window` points, each targeting the next point.
pub fn windowize(series: &[f64], window: usize) -> Result<Dataset> {
    if window == 0 || series.len() <= window {
        return Err(Error::InvalidArgument(format!(
            "series of length {} is too short for window {window}",
            series.len()
        )));
    }
    let inputs = series.windows(window).take(series.len() - window).map(<[f64]>::to_vec).collect();
    let targets = series[window..].iter().map(|&y| vec![y]).collect();
    Dataset::new(inputs, targets, Split::Train)
}
