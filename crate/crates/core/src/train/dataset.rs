use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Paired inputs and targets. Inputs lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub split: Split,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, split: Split) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Shape("input rows differ in length".into()));
            }
            if targets.iter().any(|r| r.len() != targets[0].len()) {
                return Err(Error::Shape("target rows differ in length".into()));
            }
        }
        if let Some(v) = inputs.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("input value {v} outside [0, 1]")));
        }
        Ok(Dataset { inputs, targets, split })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn target_dim(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    /// Splits off the last `n_test` samples as a test set.
    pub fn split_tail(self, n_test: usize) -> Result<(Dataset, Dataset)> {
        if n_test >= self.len() {
            return Err(Error::InvalidArgument(format!("cannot hold out {n_test} of {} samples", self.len())));
        }
        let cut = self.len() - n_test;
        let mut inputs = self.inputs;
        let mut targets = self.targets;
        let test_in = inputs.split_off(cut);
        let test_t = targets.split_off(cut);
        Ok((
            Dataset { inputs, targets, split: Split::Train },
            Dataset { inputs: test_in, targets: test_t, split: Split::Test },
        ))
    }
}

pub fn one_hot(labels: &[u8], classes: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&l| {
            let mut row = vec![0.0; classes];
            row[l as usize] = 1.0;
            row
        })
        .collect()
}

/// Index of the largest entry (first one on ties).
pub fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) }).0
}
