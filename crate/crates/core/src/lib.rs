//! Noise propagation in deep networks of noisy analog neurons.
//!
//! Monte-Carlo simulation of noisy forward passes, closed-form prediction of
//! per-layer variances and SNR, pre-activation density models and a small
//! trainer for building the networks under study.

// NaN-rejecting guards are written as `!(x >= 0.0)` on purpose; jet and
// convolution loops index several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod activation;
pub mod analytic;
pub mod compare;
pub mod density;
pub mod error;
pub mod jet;
pub mod matrix;
pub mod network;
pub mod noise;
pub mod sim;
pub mod train;

pub use activation::ActivationKind;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use network::{make_symmetric, weight_stats, LayerSpec, Network, WeightStats};
pub use noise::NoiseConfig;
