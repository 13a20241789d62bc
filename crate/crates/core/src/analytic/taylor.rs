//! Variance of `f(X)` for Gaussian `X` from a truncated Taylor expansion of `f`
//! around the mean.

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::jet::MAX_ORDER;

/// Central moments `V_1..=V_max` of `N(0, var)`; entry `m - 1` holds `V_m`.
pub fn gaussian_central_moments(var: f64, max: usize) -> Vec<f64> {
    let mut v = vec![0.0; max];
    let mut even = 1.0;
    for k in 1..=max / 2 {
        // V_2k = (2k - 1) V_{2k-2} var
        even *= (2 * k - 1) as f64 * var;
        v[2 * k - 1] = even;
    }
    v
}

/// Taylor coefficients `T_m = f^(m)(mu) / m!` for `m = 1..=M` and central
/// moments `V_m` for `m = 1..=2M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorMoments {
    pub taylor_coeffs: Vec<f64>,
    pub central_moments: Vec<f64>,
}

impl TaylorMoments {
    pub fn gaussian(kind: ActivationKind, mean: f64, var: f64, order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::UnsupportedOrder { order, max: MAX_ORDER });
        }
        if !(var >= 0.0) {
            return Err(Error::InvalidArgument(format!("variance must be non-negative, got {var}")));
        }
        let jet = kind.taylor(mean, order)?;
        Ok(TaylorMoments {
            taylor_coeffs: jet.coeffs()[1..=order].to_vec(),
            central_moments: gaussian_central_moments(var, 2 * order),
        })
    }

    pub fn order(&self) -> usize {
        self.taylor_coeffs.len()
    }

    /// `T_m`, `m >= 1`.
    pub fn t(&self, m: usize) -> f64 {
        self.taylor_coeffs[m - 1]
    }

    /// `V_m`, `m >= 1`.
    pub fn v(&self, m: usize) -> f64 {
        self.central_moments[m - 1]
    }

    /// `E[f(X)] - f(mu)` at full order.
    pub fn mean_shift(&self) -> f64 {
        (1..=self.order()).map(|m| self.t(m) * self.v(m)).sum()
    }

    /// `Var|_M` from the double sum `sum_{m,i} T_m T_i V_{m+i} - (sum_m T_m V_m)^2`.
    pub fn variance_direct(&self) -> f64 {
        let m_max = self.order();
        let mut second = 0.0;
        for m in 1..=m_max {
            for i in 1..=m_max {
                second += self.t(m) * self.t(i) * self.v(m + i);
            }
        }
        second - self.mean_shift().powi(2)
    }

    /// `Var|_1, ..., Var|_M`, each order built from the previous one.
    pub fn variance_by_order(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.order());
        let mut var = 0.0;
        let mut shift = 0.0;
        for m in 1..=self.order() {
            let tm = self.t(m);
            let cross: f64 = (1..m).map(|i| self.t(i) * self.v(m + i)).sum();
            let new_shift = shift + tm * self.v(m);
            var += tm * tm * self.v(2 * m) + 2.0 * tm * cross - (new_shift * new_shift - shift * shift);
            shift = new_shift;
            out.push(var);
        }
        out
    }
}

/// `f'(mean)^2 var`.
pub fn first_order_f(kind: ActivationKind, mean_pre: f64, var_pre: f64) -> Result<f64> {
    taylor_f(kind, mean_pre, var_pre, 1)
}

/// Variance of `f(X)`, `X ~ N(mean_pre, var_pre)`, from the order-`M` expansion.
pub fn taylor_f(kind: ActivationKind, mean_pre: f64, var_pre: f64, order: usize) -> Result<f64> {
    let tm = TaylorMoments::gaussian(kind, mean_pre, var_pre, order)?;
    Ok(*tm.variance_by_order().last().expect("order >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gaussian_moments() {
        let v = gaussian_central_moments(2.0, 8);
        assert_eq!(v, vec![0.0, 2.0, 0.0, 12.0, 0.0, 120.0, 0.0, 1680.0]);
    }

    #[test]
    fn cubic_third_order() {
        let tm = TaylorMoments::gaussian(ActivationKind::Cubic, 0.5, 0.01, 3).unwrap();
        assert_relative_eq!(tm.t(1), 1.5, epsilon = 1e-15);
        assert!(tm.t(2).abs() < 1e-15);
        assert_relative_eq!(tm.t(3), -2.0, epsilon = 1e-15);
        for v in [1e-4, 0.01, 0.05] {
            let expected = 2.25 * v - 18.0 * v * v + 60.0 * v * v * v;
            assert_relative_eq!(taylor_f(ActivationKind::Cubic, 0.5, v, 3).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn cubic_third_order_is_exact() {
        // f is a cubic polynomial, so M = 3 is the exact Gaussian variance at any mean.
        let (mu, v) = (0.3f64, 0.02f64);
        let tm = TaylorMoments::gaussian(ActivationKind::Cubic, mu, v, 3).unwrap();
        let (t1, t2, t3) = (6.0 * mu * (1.0 - mu), 3.0 - 6.0 * mu, -2.0);
        assert_relative_eq!(tm.t(1), t1, max_relative = 1e-14);
        assert_relative_eq!(tm.t(2), t2, max_relative = 1e-14);
        assert_relative_eq!(tm.t(3), t3, max_relative = 1e-14);
        let exact = t1 * t1 * v + 2.0 * t2 * t2 * v * v + 6.0 * t1 * t3 * v * v + 15.0 * t3 * t3 * v.powi(3);
        assert_relative_eq!(tm.variance_direct(), exact, max_relative = 1e-12);
        assert_relative_eq!(taylor_f(ActivationKind::Cubic, mu, v, 15).unwrap(), exact, max_relative = 1e-12);
    }

    #[test]
    fn first_order_cases() {
        let v = 1e-3;
        assert_relative_eq!(first_order_f(ActivationKind::ShiftedSigmoid { alpha: 2.0 }, 0.5, v).unwrap(), v);
        assert_eq!(first_order_f(ActivationKind::Identity, 3.0, v).unwrap(), v);
        assert_relative_eq!(first_order_f(ActivationKind::ShiftedSigmoid { alpha: 4.0 }, 0.5, v).unwrap(), 4e-3);
        assert_relative_eq!(first_order_f(ActivationKind::LinearSlope { alpha: 1.5 }, -2.0, v).unwrap(), 2.25e-3);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(matches!(taylor_f(ActivationKind::Cubic, 0.5, 0.1, 0), Err(Error::UnsupportedOrder { .. })));
        assert!(matches!(taylor_f(ActivationKind::Cubic, 0.5, 0.1, 16), Err(Error::UnsupportedOrder { .. })));
        assert!(taylor_f(ActivationKind::Cubic, 0.5, -0.1, 2).is_err());
    }

    #[test]
    fn odd_even_pairs_at_inflection() {
        let f = ActivationKind::ShiftedSigmoid { alpha: 3.0 };
        let all = TaylorMoments::gaussian(f, 0.5, 0.004, 15).unwrap().variance_by_order();
        for m in (1..15).step_by(2) {
            let (a, b) = (all[m - 1], all[m]);
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs(), "M={m}: {a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn first_order_is_order_one(alpha in 0.5f64..5.0, mu in -1.0f64..2.0, v in 0.0f64..0.5) {
            let f = ActivationKind::ShiftedSigmoid { alpha };
            prop_assert_eq!(first_order_f(f, mu, v).unwrap(), taylor_f(f, mu, v, 1).unwrap());
            let s = f.slope(mu);
            prop_assert!((first_order_f(f, mu, v).unwrap() - s * s * v).abs() <= 1e-12 * (s * s * v).max(1e-300));
        }

        #[test]
        fn recurrence_matches_double_sum(alpha in 0.5f64..5.0, mu in -1.0f64..2.0, v in 0.0f64..0.01, m in 1usize..=15) {
            let tm = TaylorMoments::gaussian(ActivationKind::ShiftedSigmoid { alpha }, mu, v, m).unwrap();
            let direct = tm.variance_direct();
            let rec = *tm.variance_by_order().last().unwrap();
            let scale = (1..=2 * m).map(|k| tm.v(k).abs()).fold(0.0, f64::max)
                * tm.taylor_coeffs.iter().map(|t| t * t).sum::<f64>();
            prop_assert!((direct - rec).abs() <= 1e-10 * scale.max(1e-300), "{} vs {}", direct, rec);
        }
    }
}
