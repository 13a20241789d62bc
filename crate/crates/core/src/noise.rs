use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intensities of the four neuron noise sources. Each source enters a neuron's
/// output with standard deviation `sqrt(2 D)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default)]
    pub d_add_uncorr: f64,
    #[serde(default)]
    pub d_add_corr: f64,
    #[serde(default)]
    pub d_mult_uncorr: f64,
    #[serde(default)]
    pub d_mult_corr: f64,
}

impl NoiseConfig {
    pub fn new(d_add_uncorr: f64, d_add_corr: f64, d_mult_uncorr: f64, d_mult_corr: f64) -> Result<Self> {
        let cfg = NoiseConfig { d_add_uncorr, d_add_corr, d_mult_uncorr, d_mult_corr };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn noiseless() -> Self {
        NoiseConfig::default()
    }

    pub fn additive_uncorrelated(d: f64) -> Self {
        NoiseConfig { d_add_uncorr: d, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.d_add_uncorr, self.d_add_corr, self.d_mult_uncorr, self.d_mult_corr];
        if all.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise intensities must be finite and non-negative, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Overall additive variance `2 D^C_A + 2 D^U_A`.
    pub fn sigma2_add(&self) -> f64 {
        2.0 * self.d_add_corr + 2.0 * self.d_add_uncorr
    }

    /// Overall multiplicative variance `2 D^C_M + 2 D^U_M + 4 D^C_M D^U_M`.
    pub fn sigma2_mult(&self) -> f64 {
        2.0 * self.d_mult_corr + 2.0 * self.d_mult_uncorr + 4.0 * self.d_mult_corr * self.d_mult_uncorr
    }

    pub fn is_noiseless(&self) -> bool {
        self.d_add_uncorr == 0.0 && self.d_add_corr == 0.0 && self.d_mult_uncorr == 0.0 && self.d_mult_corr == 0.0
    }
}
