//! Densities of layer pre-activations and the expectation integrals that feed
//! the trained-network noise recurrence.

mod histogram;
pub mod quad;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::network::Network;

pub use histogram::{freedman_diaconis_bins, Histogram};
use quad::{integrate, QuadOptions};

/// Half-width of the stored support of a normal density, in standard deviations.
const NORMAL_SUPPORT_SIGMAS: f64 = 12.0;

/// Fraction of the sample range added on each side of a quartic-exponential fit.
const QUARTIC_SUPPORT_PAD: f64 = 0.1;

/// Family used to model pre-activation densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Empirical,
    Normal,
    Uniform,
    QuarticExp,
}

impl DensityKind {
    /// Fits this family to `samples`, using Freedman–Diaconis bins where a
    /// histogram is needed.
    pub fn fit(self, samples: &[f64]) -> Result<DensityModel> {
        match self {
            DensityKind::Empirical => fit_empirical(samples, freedman_diaconis_bins(samples)),
            DensityKind::Normal => fit_normal(samples),
            DensityKind::Uniform => fit_uniform(samples),
            DensityKind::QuarticExp => fit_quartic_exp(samples, freedman_diaconis_bins(samples)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    /// Piecewise-constant density; `masses[k]` is the probability of
    /// `[edges[k], edges[k + 1])`.
    Empirical {
        edges: Vec<f64>,
        masses: Vec<f64>,
    },
    Normal {
        mean: f64,
        variance: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `exp(c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0) / norm` on `[lo, hi]`;
    /// `coeffs[j]` multiplies `x^j`.
    QuarticExp {
        coeffs: [f64; 5],
        lo: f64,
        hi: f64,
        norm: f64,
    },
}

impl DensityModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DensityModel::Empirical { .. } => "empirical",
            DensityModel::Normal { .. } => "normal",
            DensityModel::Uniform { .. } => "uniform",
            DensityModel::QuarticExp { .. } => "quartic_exp",
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            DensityModel::Empirical { edges, .. } => (edges[0], edges[edges.len() - 1]),
            DensityModel::Normal { mean, variance } => {
                let half = NORMAL_SUPPORT_SIGMAS * variance.sqrt();
                (mean - half, mean + half)
            }
            DensityModel::Uniform { lo, hi } => (*lo, *hi),
            DensityModel::QuarticExp { lo, hi, .. } => (*lo, *hi),
        }
    }

    fn point_mass(&self) -> Option<f64> {
        match self {
            DensityModel::Normal { mean, variance } if *variance == 0.0 => Some(*mean),
            DensityModel::Uniform { lo, hi } if lo == hi => Some(*lo),
            _ => None,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match self {
            DensityModel::Empirical { edges, masses } => {
                let k = edges.partition_point(|&e| e <= x).saturating_sub(1).min(masses.len() - 1);
                masses[k] / (edges[k + 1] - edges[k])
            }
            DensityModel::Normal { mean, variance } => {
                let z = (x - mean) / variance.sqrt();
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            DensityModel::Uniform { lo, hi } => 1.0 / (hi - lo),
            DensityModel::QuarticExp { coeffs, norm, .. } => quartic(coeffs, x).exp() / norm,
        }
    }

    /// `E[g(Z)]` under this density.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        if let Some(x) = self.point_mass() {
            return Ok(g(x));
        }
        let opts = QuadOptions::default();
        match self {
            DensityModel::Empirical { edges, masses } => {
                let mut total = 0.0;
                for (k, &mass) in masses.iter().enumerate() {
                    if mass == 0.0 {
                        continue;
                    }
                    let (a, b) = (edges[k], edges[k + 1]);
                    total += mass / (b - a) * integrate(&g, a, b, opts)?;
                }
                Ok(total)
            }
            _ => {
                let (lo, hi) = self.support();
                integrate(|x| g(x) * self.pdf(x), lo, hi, opts)
            }
        }
    }

    pub fn total_mass(&self) -> Result<f64> {
        match self {
            DensityModel::Empirical { masses, .. } => Ok(masses.iter().sum()),
            _ => self.expectation(|_| 1.0),
        }
    }

    /// `{"kind": .., "params": .., "support": [lo, hi]}`
    pub fn to_export(&self) -> serde_json::Value {
        let (lo, hi) = self.support();
        let params = match self {
            DensityModel::Empirical { edges, masses } => json!({ "edges": edges, "masses": masses }),
            DensityModel::Normal { mean, variance } => json!({ "mean": mean, "variance": variance }),
            DensityModel::Uniform { lo, hi } => json!({ "lo": lo, "hi": hi }),
            DensityModel::QuarticExp { coeffs, norm, .. } => json!({
                "c0": coeffs[0], "c1": coeffs[1], "c2": coeffs[2], "c3": coeffs[3], "c4": coeffs[4],
                "norm": norm,
            }),
        };
        json!({ "kind": self.kind_name(), "params": params, "support": [lo, hi] })
    }

    pub fn from_export(value: &serde_json::Value) -> Result<Self> {
        let exported: Exported = serde_json::from_value(value.clone())?;
        let p = &exported.params;
        let num = |key: &str| -> Result<f64> {
            p.get(key)
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| Error::InvalidArgument(format!("density params missing '{key}'")))
        };
        let [lo, hi] = exported.support;
        let model = match exported.kind.as_str() {
            "empirical" => DensityModel::Empirical {
                edges: serde_json::from_value(p["edges"].clone())?,
                masses: serde_json::from_value(p["masses"].clone())?,
            },
            "normal" => DensityModel::Normal { mean: num("mean")?, variance: num("variance")? },
            "uniform" => DensityModel::Uniform { lo: num("lo")?, hi: num("hi")? },
            "quartic_exp" => DensityModel::QuarticExp {
                coeffs: [num("c0")?, num("c1")?, num("c2")?, num("c3")?, num("c4")?],
                lo,
                hi,
                norm: num("norm")?,
            },
            other => return Err(Error::InvalidArgument(format!("unknown density kind '{other}'"))),
        };
        Ok(model)
    }
}

#[derive(Deserialize)]
struct Exported {
    kind: String,
    params: serde_json::Value,
    support: [f64; 2],
}

fn quartic(c: &[f64; 5], x: f64) -> f64 {
    (((c[4] * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0]
}

/// Expectations of `f`, `f^2` and `f'^2` of a pre-activation density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityIntegrals {
    /// `mu(E(y)) = int f(z) p(z) dz`
    pub mean_f: f64,
    /// `eta(E(y)) = int f(z)^2 p(z) dz`
    pub mean_f_sq: f64,
    /// `eta(f'(f^-1(E(y)))) = int f'(z)^2 p(z) dz`
    pub mean_fprime_sq: f64,
}

pub fn density_integrals(p: &DensityModel, kind: ActivationKind) -> Result<DensityIntegrals> {
    Ok(DensityIntegrals {
        mean_f: p.expectation(|z| kind.apply(z))?,
        mean_f_sq: p.expectation(|z| kind.apply(z).powi(2))?,
        mean_fprime_sq: p.expectation(|z| kind.slope(z).powi(2))?,
    })
}

/// Noiseless pre-activations gathered over every input and neuron, per layer
/// (entry 0 holds the inputs).
pub fn collect_preactivations(net: &Network, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("need at least one input".into()));
    }
    let mut layers: Vec<Vec<f64>> = net.sizes().iter().map(|&s| Vec::with_capacity(s * inputs.len())).collect();
    for input in inputs {
        let act = net.forward(input)?;
        for (dst, src) in layers.iter_mut().zip(act.pre) {
            dst.extend(src);
        }
    }
    Ok(layers)
}

/// One fitted density per hidden layer, from the noiseless pre-activations of
/// every neuron over `inputs`.
pub fn fit_layer_densities(net: &Network, inputs: &[Vec<f64>], kind: DensityKind) -> Result<Vec<DensityModel>> {
    let layers = collect_preactivations(net, inputs)?;
    let hidden = net.num_layers() - 1;
    layers[1..hidden].iter().map(|samples| kind.fit(samples)).collect()
}

pub fn fit_normal(samples: &[f64]) -> Result<DensityModel> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!("normal fit needs at least 2 samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(DensityModel::Normal { mean, variance })
}

pub fn fit_uniform(samples: &[f64]) -> Result<DensityModel> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!("uniform fit needs at least 2 samples, got {}", samples.len())));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DensityModel::Uniform { lo, hi })
}

pub fn fit_empirical(samples: &[f64], bins: usize) -> Result<DensityModel> {
    let h = Histogram::from_samples(samples, bins)?;
    Ok(DensityModel::Empirical { edges: h.edges.clone(), masses: h.masses() })
}

/// Fits `exp(quartic)` to the log of the histogram density by least squares
/// weighted with bin mass, then renormalizes over the sample range padded by
/// 10% on each side.
pub fn fit_quartic_exp(samples: &[f64], bins: usize) -> Result<DensityModel> {
    if samples.len() < 100 {
        return Err(Error::Fit(format!("quartic fit needs at least 100 samples, got {}", samples.len())));
    }
    if bins < 10 {
        return Err(Error::Fit(format!("quartic fit needs at least 10 bins, got {bins}")));
    }
    let hist = Histogram::from_samples(samples, bins)?;
    let (min, max) = hist.range();
    let center = 0.5 * (min + max);
    let scale = 0.5 * (max - min);

    let total = samples.len() as f64;
    let rows: Vec<(f64, f64, f64)> = hist
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| {
            let (a, b) = (hist.edges[k], hist.edges[k + 1]);
            let z = (0.5 * (a + b) - center) / scale;
            let mass = c as f64 / total;
            (z, (mass / (b - a)).ln(), mass)
        })
        .collect();
    if rows.len() < 5 {
        return Err(Error::Fit(format!("only {} non-empty bins, a quartic needs 5", rows.len())));
    }

    let design = DMatrix::from_fn(rows.len(), 5, |r, j| rows[r].2.sqrt() * rows[r].0.powi(j as i32));
    let target = DVector::from_iterator(rows.len(), rows.iter().map(|(_, y, w)| w.sqrt() * y));
    let z_coeffs =
        design.svd(true, true).solve(&target, 1e-12).map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;

    // Re-express sum_j a_j ((x - center) / scale)^j in powers of x.
    let alpha = 1.0 / scale;
    let beta = -center / scale;
    let mut coeffs = [0.0; 5];
    for j in 0..5 {
        for (i, c) in coeffs.iter_mut().enumerate().take(j + 1) {
            *c += z_coeffs[j] * binomial(j, i) * alpha.powi(i as i32) * beta.powi((j - i) as i32);
        }
    }

    let pad = QUARTIC_SUPPORT_PAD * (max - min);
    let (lo, hi) = (min - pad, max + pad);
    // Shift the constant so the log-density peaks at 0 on the support.
    let peak =
        (0..=1000).map(|s| quartic(&coeffs, lo + (hi - lo) * s as f64 / 1000.0)).fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Fit("fitted log-density is not finite on its support".into()));
    }
    coeffs[0] -= peak;
    let norm = integrate(|x| quartic(&coeffs, x).exp(), lo, hi, QuadOptions::default())?;
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Fit(format!("normalization {norm} is not positive and finite")));
    }
    Ok(DensityModel::QuarticExp { coeffs, lo, hi, norm })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Writes `bin_lo, bin_hi, mass` rows.
pub fn write_histogram_csv<W: Write>(hist: &Histogram, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_lo", "bin_hi", "mass"])?;
    for (k, mass) in hist.masses().iter().enumerate() {
        w.write_record([hist.edges[k].to_string(), hist.edges[k + 1].to_string(), mass.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::make_symmetric;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn normal_samples(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mean, sd).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn quartic_fit_recovers_standard_normal() {
        let s = normal_samples(100_000, 0.0, 1.0, 1);
        let bins = freedman_diaconis_bins(&s);
        let m = fit_quartic_exp(&s, bins).unwrap();
        let DensityModel::QuarticExp { coeffs, .. } = m else { panic!() };
        assert!((coeffs[2] + 0.5).abs() < 0.05, "c2 = {}", coeffs[2]);
        assert!(coeffs[3].abs() < 0.02, "c3 = {}", coeffs[3]);
        assert!(coeffs[4].abs() < 0.02, "c4 = {}", coeffs[4]);
        assert_relative_eq!(m.total_mass().unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn quartic_fit_of_mixture_is_bimodal() {
        let mut s = normal_samples(50_000, -2.0, 0.5, 2);
        s.extend(normal_samples(50_000, 2.0, 0.5, 3));
        let m = fit_quartic_exp(&s, freedman_diaconis_bins(&s)).unwrap();
        let (lo, hi) = m.support();
        let grid: Vec<f64> = (0..=2000).map(|i| m.pdf(lo + (hi - lo) * i as f64 / 2000.0)).collect();
        let maxima = grid.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count();
        assert_eq!(maxima, 2);
    }

    #[test]
    fn degenerate_samples_are_rejected() {
        assert!(matches!(fit_quartic_exp(&vec![0.3; 500], 20), Err(Error::Fit(_))));
        assert!(fit_quartic_exp(&normal_samples(99, 0.0, 1.0, 4), 20).is_err());
        assert!(fit_quartic_exp(&normal_samples(1000, 0.0, 1.0, 4), 9).is_err());
        // 4 distinct values -> at most 4 non-empty bins
        let four: Vec<f64> = (0..400).map(|i| (i % 4) as f64).collect();
        assert!(matches!(fit_quartic_exp(&four, 10), Err(Error::Fit(_))));
    }

    #[test]
    fn normal_and_uniform_fits() {
        let n = fit_normal(&[0.0, 1.0]).unwrap();
        assert_eq!(n, DensityModel::Normal { mean: 0.5, variance: 0.5 });
        let u = fit_uniform(&[0.0, 1.0]).unwrap();
        assert_eq!(u, DensityModel::Uniform { lo: 0.0, hi: 1.0 });
        assert!(fit_normal(&[1.0]).is_err());

        let s = normal_samples(10_000, 1.5, 0.3, 9);
        let DensityModel::Normal { mean, variance } = fit_normal(&s).unwrap() else { panic!() };
        let se_mean = 0.3 / 100.0;
        let se_var = 0.09 * (2.0f64 / 9999.0).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * se_mean);
        assert!((variance - 0.09).abs() < 3.0 * se_var);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Uniform::new(-0.4, 2.2).unwrap();
        let s: Vec<f64> = (0..1000).map(|_| d.sample(&mut rng)).collect();
        let DensityModel::Uniform { lo, hi } = fit_uniform(&s).unwrap() else { panic!() };
        assert!(lo >= -0.4 && hi <= 2.2);
    }

    #[test]
    fn integrals_against_closed_forms() {
        let u = DensityModel::Uniform { lo: 0.0, hi: 1.0 };
        let r = density_integrals(&u, ActivationKind::Identity).unwrap();
        assert_relative_eq!(r.mean_f, 0.5, epsilon = 1e-8);
        assert_relative_eq!(r.mean_f_sq, 1.0 / 3.0, epsilon = 1e-8);
        assert_relative_eq!(r.mean_fprime_sq, 1.0, epsilon = 1e-8);

        // cubic on U(0,1): E f = 1/2, E f^2 = 13/35, E f'^2 = 6/5
        let r = density_integrals(&u, ActivationKind::Cubic).unwrap();
        assert_relative_eq!(r.mean_f, 0.5, epsilon = 1e-10);
        assert_relative_eq!(r.mean_f_sq, 13.0 / 35.0, epsilon = 1e-10);
        assert_relative_eq!(r.mean_fprime_sq, 1.2, epsilon = 1e-10);
    }

    #[test]
    fn narrow_normal_acts_as_point_mass() {
        let f = ActivationKind::ShiftedSigmoid { alpha: 3.0 };
        let z0 = 0.61;
        let p = DensityModel::Normal { mean: z0, variance: 1e-12 };
        let r = density_integrals(&p, f).unwrap();
        assert!((r.mean_f - f.apply(z0)).abs() < 1e-6);
        assert!((r.mean_f_sq - f.apply(z0).powi(2)).abs() < 1e-6);
        assert!((r.mean_fprime_sq - f.slope(z0).powi(2)).abs() < 1e-6);
    }

    #[test]
    fn empirical_integrals_match_sample_averages() {
        let f = ActivationKind::StandardSigmoid;
        let s = normal_samples(10_000, 0.3, 1.2, 6);
        let p = fit_empirical(&s, freedman_diaconis_bins(&s)).unwrap();
        let r = density_integrals(&p, f).unwrap();
        let n = s.len() as f64;
        let mf = s.iter().map(|&z| f.apply(z)).sum::<f64>() / n;
        let mf2 = s.iter().map(|&z| f.apply(z).powi(2)).sum::<f64>() / n;
        let md2 = s.iter().map(|&z| f.slope(z).powi(2)).sum::<f64>() / n;
        assert!((r.mean_f / mf - 1.0).abs() < 0.02);
        assert!((r.mean_f_sq / mf2 - 1.0).abs() < 0.02);
        assert!((r.mean_fprime_sq / md2 - 1.0).abs() < 0.02);
    }

    #[test]
    fn every_model_normalizes() {
        let s = normal_samples(5_000, -1.0, 2.0, 8);
        let bins = freedman_diaconis_bins(&s);
        let models = [
            fit_empirical(&s, bins).unwrap(),
            fit_normal(&s).unwrap(),
            fit_uniform(&s).unwrap(),
            fit_quartic_exp(&s, bins).unwrap(),
            DensityModel::Normal { mean: 3.0, variance: 1e-12 },
        ];
        for m in &models {
            assert!((m.total_mass().unwrap() - 1.0).abs() <= 1e-6, "{}", m.kind_name());
        }
    }

    #[test]
    fn export_round_trip() {
        let s = normal_samples(2_000, 0.0, 1.0, 10);
        for m in [fit_quartic_exp(&s, 30).unwrap(), fit_empirical(&s, 12).unwrap(), fit_uniform(&s).unwrap()] {
            let v = m.to_export();
            assert_eq!(v["kind"], m.kind_name());
            assert_eq!(DensityModel::from_export(&v).unwrap(), m);
        }
        let v = fit_normal(&s).unwrap().to_export();
        let back = DensityModel::from_export(&v).unwrap();
        assert_eq!(back, fit_normal(&s).unwrap());
    }

    #[test]
    fn symmetric_net_constant_input_gives_constant_layers() {
        let net = make_symmetric(&[1, 5, 5, 1], ActivationKind::ShiftedSigmoid { alpha: 3.0 }).unwrap();
        let inputs = vec![vec![0.7]; 6];
        let layers = collect_preactivations(&net, &inputs).unwrap();
        for (n, layer) in layers.iter().enumerate().skip(1) {
            assert_eq!(layer.len(), 6 * net.sizes()[n]);
            assert!(layer.iter().all(|&v| v == layer[0]));
        }
        assert!(collect_preactivations(&net, &[]).is_err());
    }
}
