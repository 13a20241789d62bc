use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported derivative order {order} (supported: 1..={max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("non-finite value in layer {layer}, neuron {neuron}")]
    NonFinite { layer: usize, neuron: usize },

    #[error("network is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("missing density for layer {0}")]
    MissingDensity(usize),

    #[error("density fit failed: {0}")]
    Fit(String),

    #[error("quadrature did not converge on [{lo}, {hi}] (estimated error {error:e})")]
    Quadrature { lo: f64, hi: f64, error: f64 },

    #[error("idx format: {0}")]
    Idx(String),

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
