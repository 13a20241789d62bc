//! Neuron transfer functions with arbitrary-order derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, Real, MAX_ORDER};

/// Transfer function `f` applied to a neuron's pre-activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Identity,
    /// `f(x) = alpha * x`
    LinearSlope {
        alpha: f64,
    },
    /// Sigmoid with its inflection moved to 0.5 and slope `alpha / 2` there:
    /// `f(x) = 1/2 + alpha (x - 1/2) / (2 sqrt(1 + alpha^2 (x - 1/2)^2))`.
    ShiftedSigmoid {
        alpha: f64,
    },
    /// Logistic `1 / (1 + e^-x)`.
    StandardSigmoid,
    /// `f(x) = 3x^2 - 2x^3`
    Cubic,
}

impl ActivationKind {
    pub fn eval<T: Real>(&self, x: T) -> T {
        match *self {
            ActivationKind::Identity => x,
            ActivationKind::LinearSlope { alpha } => x.scale(alpha),
            ActivationKind::ShiftedSigmoid { alpha } => {
                let u = x.offset(-0.5).scale(alpha);
                let den = (u * u).offset(1.0).sqrt().scale(2.0);
                (u / den).offset(0.5)
            }
            ActivationKind::StandardSigmoid => x.lift(1.0) / x.scale(-1.0).exp().offset(1.0),
            ActivationKind::Cubic => {
                let sq = x * x;
                sq.scale(3.0) - (sq * x).scale(2.0)
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::StandardSigmoid => logistic(x),
            _ => self.eval(x),
        }
    }

    /// Closed-form first derivative, for hot loops (training, simulation).
    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Identity => 1.0,
            ActivationKind::LinearSlope { alpha } => alpha,
            ActivationKind::ShiftedSigmoid { alpha } => {
                let u = alpha * (x - 0.5);
                alpha / (2.0 * (1.0 + u * u).powf(1.5))
            }
            ActivationKind::StandardSigmoid => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            ActivationKind::Cubic => 6.0 * x * (1.0 - x),
        }
    }

    /// Taylor expansion of `f` around `x` up to `order`.
    pub fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder { order, max: MAX_ORDER });
        }
        Ok(self.eval(Jet::variable(x, order)))
    }

    /// `f^(m)(x)` for `1 <= m <= 15`.
    pub fn derivative(&self, x: f64, m: usize) -> Result<f64> {
        if m == 0 || m > MAX_ORDER {
            return Err(Error::UnsupportedOrder { order: m, max: MAX_ORDER });
        }
        Ok(self.taylor(x, m)?.derivative(m))
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ActivationKind::Identity | ActivationKind::LinearSlope { .. })
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activate(kind: ActivationKind, x: f64) -> f64 {
    kind.apply(x)
}

pub fn derivative(kind: ActivationKind, x: f64, m: usize) -> Result<f64> {
    kind.derivative(x, m)
}
