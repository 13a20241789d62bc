//! Fully connected feed-forward networks and their weight statistics.
//!
//! Layers are indexed from 0 in the API (layer 0 is the input layer); CSV
//! outputs use 1-based layer numbers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One layer of a network. The input layer carries no weights or biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub size: usize,
    pub activation: ActivationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biases: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct Network {
    layers: Vec<LayerSpec>,
}

#[derive(Deserialize)]
struct RawNetwork {
    layers: Vec<LayerSpec>,
}

impl TryFrom<RawNetwork> for Network {
    type Error = Error;
    fn try_from(raw: RawNetwork) -> Result<Self> {
        Network::new(raw.layers)
    }
}

/// Noiseless activity of every layer for one input.
#[derive(Debug, Clone)]
pub struct Activity {
    /// Pre-activations `x~` per layer (layer 0 holds the input).
    pub pre: Vec<Vec<f64>>,
    /// Outputs `x = f(x~)` per layer.
    pub post: Vec<Vec<f64>>,
}

impl Network {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidNetwork(format!("need at least 2 layers, got {}", layers.len())));
        }
        for (n, layer) in layers.iter().enumerate() {
            if layer.size == 0 {
                return Err(Error::InvalidNetwork(format!("layer {} has zero neurons", n + 1)));
            }
            if n == 0 {
                if layer.activation != ActivationKind::Identity {
                    return Err(Error::InvalidNetwork("input layer must use the identity activation".into()));
                }
                if layer.weights.is_some() || layer.biases.is_some() {
                    return Err(Error::InvalidNetwork("input layer must not carry weights or biases".into()));
                }
                continue;
            }
            let prev = layers[n - 1].size;
            let w = layer
                .weights
                .as_ref()
                .ok_or_else(|| Error::InvalidNetwork(format!("layer {} is missing weights", n + 1)))?;
            if w.rows() != layer.size || w.cols() != prev {
                return Err(Error::Shape(format!(
                    "layer {} weights are {}x{}, expected {}x{}",
                    n + 1,
                    w.rows(),
                    w.cols(),
                    layer.size,
                    prev
                )));
            }
            match &layer.biases {
                Some(b) if b.len() != layer.size => {
                    return Err(Error::Shape(format!(
                        "layer {} has {} biases for {} neurons",
                        n + 1,
                        b.len(),
                        layer.size
                    )));
                }
                Some(_) => {}
                None => return Err(Error::InvalidNetwork(format!("layer {} is missing biases", n + 1))),
            }
        }
        Ok(Network { layers })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Network::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.size).collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].size
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].size
    }

    pub fn activation(&self, n: usize) -> ActivationKind {
        self.layers[n].activation
    }

    /// Weights into layer `n >= 1`.
    pub fn weights(&self, n: usize) -> &Matrix {
        self.layers[n].weights.as_ref().expect("validated: non-input layers carry weights")
    }

    pub fn biases(&self, n: usize) -> &[f64] {
        self.layers[n].biases.as_deref().expect("validated: non-input layers carry biases")
    }

    pub(crate) fn params_mut(&mut self, n: usize) -> (&mut Matrix, &mut Vec<f64>) {
        let layer = &mut self.layers[n];
        (
            layer.weights.as_mut().expect("validated: non-input layers carry weights"),
            layer.biases.as_mut().expect("validated: non-input layers carry biases"),
        )
    }

    pub fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Noiseless forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Activity> {
        self.check_input(input)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        pre.push(input.to_vec());
        post.push(input.to_vec());
        for n in 1..self.layers.len() {
            let mut x = vec![0.0; self.layers[n].size];
            self.weights(n).affine_into(&post[n - 1], self.biases(n), &mut x);
            let f = self.activation(n);
            let y = x.iter().map(|&v| f.apply(v)).collect();
            pre.push(x);
            post.push(y);
        }
        Ok(Activity { pre, post })
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.post.pop().expect("at least two layers"))
    }

    /// True when every weight into layer `n` equals `1 / I_{n-1}` and all
    /// biases are zero.
    pub fn is_symmetric(&self) -> bool {
        (1..self.layers.len()).all(|n| {
            let w = self.weights(n);
            let target = 1.0 / w.cols() as f64;
            w.as_slice().iter().all(|&v| v == target) && self.biases(n).iter().all(|&b| b == 0.0)
        })
    }
}

/// Uniformly connected network: every weight into layer `n` is `1 / I_{n-1}`,
/// biases are zero, the first and last layers are linear and every hidden layer
/// uses `activation`.
pub fn make_symmetric(layer_sizes: &[usize], activation: ActivationKind) -> Result<Network> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidNetwork("need at least 2 layer sizes".into()));
    }
    let last = layer_sizes.len() - 1;
    let layers = layer_sizes
        .iter()
        .enumerate()
        .map(|(n, &size)| {
            let act = if n == 0 || n == last { ActivationKind::Identity } else { activation };
            if n == 0 {
                LayerSpec { size, activation: act, weights: None, biases: None }
            } else {
                let prev = layer_sizes[n - 1];
                LayerSpec {
                    size,
                    activation: act,
                    weights: Some(Matrix::filled(size, prev, 1.0 / prev as f64)),
                    biases: Some(vec![0.0; size]),
                }
            }
        })
        .collect();
    Network::new(layers)
}

/// Entry statistics of the weights into one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerWeightStats {
    /// `I_{n-1}`, the number of inputs per neuron.
    pub fan_in: usize,
    /// `I_n`.
    pub fan_out: usize,
    /// `mu(W)`: mean over all entries.
    pub mean: f64,
    /// `eta(W)`: mean of squared entries.
    pub mean_sq: f64,
    pub bias_mean: f64,
    pub bias_var: f64,
}

impl LayerWeightStats {
    pub fn from_matrix(w: &Matrix, biases: &[f64]) -> Self {
        let count = w.as_slice().len() as f64;
        let mean = w.as_slice().iter().sum::<f64>() / count;
        let mean_sq = w.as_slice().iter().map(|v| v * v).sum::<f64>() / count;
        let nb = biases.len().max(1) as f64;
        let bias_mean = biases.iter().sum::<f64>() / nb;
        let bias_var = biases.iter().map(|b| (b - bias_mean).powi(2)).sum::<f64>() / nb;
        LayerWeightStats { fan_in: w.cols(), fan_out: w.rows(), mean, mean_sq, bias_mean, bias_var }
    }

    /// `mu^2(W)`.
    pub fn mean_squared(&self) -> f64 {
        self.mean * self.mean
    }

    /// `I_{n-1}^2 mu^2(W)`, the coefficient of fully shared fluctuations.
    pub fn shared_gain(&self) -> f64 {
        let i = self.fan_in as f64;
        i * i * self.mean_squared()
    }

    /// `I_{n-1} eta(W)`, the coefficient of independent fluctuations.
    pub fn independent_gain(&self) -> f64 {
        self.fan_in as f64 * self.mean_sq
    }
}

/// Weight statistics for layers `1..N` (entry `0` describes the weights into
/// layer 1, the first non-input layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub layers: Vec<LayerWeightStats>,
}

impl WeightStats {
    /// Statistics of the weights into layer `n >= 1`.
    pub fn layer(&self, n: usize) -> &LayerWeightStats {
        &self.layers[n - 1]
    }
}

pub fn weight_stats(net: &Network) -> WeightStats {
    let layers = (1..net.num_layers()).map(|n| LayerWeightStats::from_matrix(net.weights(n), net.biases(n))).collect();
    WeightStats { layers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dense(size: usize, act: ActivationKind, rows: Vec<Vec<f64>>) -> LayerSpec {
        LayerSpec {
            size,
            activation: act,
            weights: Some(Matrix::from_rows(&rows).unwrap()),
            biases: Some(vec![0.0; size]),
        }
    }

    fn input(size: usize) -> LayerSpec {
        LayerSpec { size, activation: ActivationKind::Identity, weights: None, biases: None }
    }

    #[test]
    fn symmetric_weights() {
        let net = make_symmetric(&[1, 200, 200, 1], ActivationKind::ShiftedSigmoid { alpha: 4.0 }).unwrap();
        assert!(net.weights(1).as_slice().iter().all(|&w| w == 1.0));
        assert!(net.weights(2).as_slice().iter().all(|&w| w == 1.0 / 200.0));
        assert_eq!(net.activation(0), ActivationKind::Identity);
        assert_eq!(net.activation(3), ActivationKind::Identity);
        assert_eq!(net.activation(1), ActivationKind::ShiftedSigmoid { alpha: 4.0 });
        assert!(net.is_symmetric());

        let tiny = make_symmetric(&[1, 1], ActivationKind::Cubic).unwrap();
        assert_eq!(tiny.weights(1).as_slice(), &[1.0]);
    }

    #[test]
    fn symmetric_stats_identities() {
        let net = make_symmetric(&[1, 2, 1], ActivationKind::Cubic).unwrap();
        let s = weight_stats(&net);
        let l = s.layer(2);
        assert_eq!(l.mean_sq, 0.25);
        assert_eq!(l.mean_squared(), 0.25);
        assert_eq!(l.shared_gain(), 1.0);
        assert_eq!(l.independent_gain(), 0.5);

        let big = make_symmetric(&[1, 200, 200, 1], ActivationKind::Cubic).unwrap();
        let s = weight_stats(&big);
        // 40 000 summed entries: allow accumulated rounding
        assert_relative_eq!(s.layer(2).mean, 0.005, max_relative = 1e-10);
        assert_relative_eq!(s.layer(2).mean_sq, 2.5e-5, max_relative = 1e-10);
        assert_relative_eq!(s.layer(2).shared_gain(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(s.layer(2).independent_gain(), 1.0 / 200.0, max_relative = 1e-10);
    }

    #[test]
    fn small_matrix_stats() {
        let s = LayerWeightStats::from_matrix(&Matrix::from_rows(&[vec![-0.7]]).unwrap(), &[0.0]);
        assert_eq!(s.mean, -0.7);
        assert_relative_eq!(s.mean_sq, 0.49, max_relative = 1e-15);
        let s = LayerWeightStats::from_matrix(&Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap(), &[0.0]);
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.mean_sq, 1.0);
    }

    #[test]
    fn validation_errors() {
        assert!(Network::new(vec![input(2)]).is_err());
        // wrong column count
        let bad = Network::new(vec![input(2), dense(1, ActivationKind::Identity, vec![vec![1.0, 2.0, 3.0]])]);
        assert!(matches!(bad, Err(Error::Shape(_))));
        // nonlinear input layer
        let mut first = input(1);
        first.activation = ActivationKind::Cubic;
        assert!(Network::new(vec![first, dense(1, ActivationKind::Identity, vec![vec![1.0]])]).is_err());
    }

    #[test]
    fn json_schema_round_trip() {
        let json = r#"{"layers":[
            {"size":2,"activation":{"kind":"identity"}},
            {"size":1,"activation":{"kind":"shifted_sigmoid","alpha":2.0},"weights":[[0.5,0.25]],"biases":[0.1]}
        ]}"#;
        let net = Network::from_json(json).unwrap();
        assert_eq!(net.sizes(), vec![2, 1]);
        let again = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, again);
        let out = net.predict(&[1.0, 2.0]).unwrap();
        let f = ActivationKind::ShiftedSigmoid { alpha: 2.0 };
        assert_eq!(out, vec![f.apply(0.5 + 0.5 + 0.1)]);

        let bad = r#"{"layers":[{"size":2,"activation":{"kind":"identity"}},
            {"size":1,"activation":{"kind":"identity"},"weights":[[1.0]],"biases":[0.0]}]}"#;
        assert!(Network::from_json(bad).is_err());
    }

    proptest! {
        #[test]
        fn eta_bounds_mu_squared(entries in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            let n = entries.len();
            let w = Matrix::from_vec(1, n, entries.clone()).unwrap();
            let s = LayerWeightStats::from_matrix(&w, &[0.0]);
            prop_assert!(s.mean_sq >= s.mean_squared() - 1e-12 * s.mean_sq.max(1e-300));
            let all_equal = entries.iter().all(|&v| v == entries[0]);
            let gap = s.mean_sq - s.mean_squared();
            if !all_equal {
                // strict inequality once entries differ by more than rounding
                let spread = entries.iter().cloned().fold(f64::MIN, f64::max) - entries.iter().cloned().fold(f64::MAX, f64::min);
                if spread > 1e-6 { prop_assert!(gap > 0.0); }
            } else {
                prop_assert!(gap.abs() <= 1e-12 * s.mean_sq.max(1e-300));
            }
        }
    }
}
