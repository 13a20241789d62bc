//! Truncated Taylor-series ("jet") arithmetic.
//!
//! A [`Jet`] of order `m` stores the Taylor coefficients `c_k = g^(k)(x0) / k!`
//! for `k = 0..=m` of some function `g` around a point. Arithmetic on jets
//! propagates these coefficients exactly (up to rounding), so evaluating an
//! expression on the seed jet `x0 + h` yields every derivative of the
//! expression up to order `m` without finite differencing.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest supported jet order.
pub const MAX_ORDER: usize = 15;

const LEN: usize = MAX_ORDER + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; LEN],
}

impl Jet {
    /// Constant `value` carried at the given order.
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; LEN];
        c[0] = value;
        Jet { order, c }
    }

    /// The independent variable `x0 + h`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Jet::constant(x0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Taylor coefficient `c_k = g^(k)(x0) / k!`.
    pub fn coeff(&self, k: usize) -> f64 {
        assert!(k <= self.order);
        self.c[k]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..=self.order]
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `g^(k)(x0)`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    fn zip(&self, rhs: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(rhs.order);
        let mut c = [0.0; LEN];
        for k in 0..=order {
            c[k] = f(self.c[k], rhs.c[k]);
        }
        Jet { order, c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = *self;
        out.c[..=self.order].iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn offset(&self, s: f64) -> Jet {
        let mut out = *self;
        out.c[0] += s;
        out
    }

    pub fn recip(&self) -> Jet {
        Jet::constant(1.0, self.order) / *self
    }

    pub fn sqrt(&self) -> Jet {
        let a = &self.c;
        let mut s = [0.0; LEN];
        s[0] = a[0].sqrt();
        for k in 1..=self.order {
            let cross: f64 = (1..k).map(|i| s[i] * s[k - i]).sum();
            s[k] = (a[k] - cross) / (2.0 * s[0]);
        }
        Jet { order: self.order, c: s }
    }

    pub fn exp(&self) -> Jet {
        let a = &self.c;
        let mut e = [0.0; LEN];
        e[0] = a[0].exp();
        for k in 1..=self.order {
            let acc: f64 = (1..=k).map(|i| i as f64 * a[i] * e[k - i]).sum();
            e[k] = acc / k as f64;
        }
        Jet { order: self.order, c: e }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a - b)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut c = [0.0; LEN];
        for k in 0..=order {
            c[k] = (0..=k).map(|i| self.c[i] * rhs.c[k - i]).sum();
        }
        Jet { order, c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let b = &rhs.c;
        let mut q = [0.0; LEN];
        for k in 0..=order {
            let acc: f64 = (1..=k).map(|i| b[i] * q[k - i]).sum();
            q[k] = (self.c[k] - acc) / b[0];
        }
        Jet { order, c: q }
    }
}

/// Minimal field-like interface shared by `f64` and [`Jet`], so activation
/// functions are written once and evaluated either pointwise or as series.
pub trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn lift(&self, c: f64) -> Self;
    fn scale(&self, s: f64) -> Self;
    fn offset(&self, s: f64) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
}

impl Real for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn scale(&self, s: f64) -> f64 {
        self * s
    }
    fn offset(&self, s: f64) -> f64 {
        self + s
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
}

impl Real for Jet {
    fn lift(&self, c: f64) -> Jet {
        Jet::constant(c, self.order)
    }
    fn scale(&self, s: f64) -> Jet {
        Jet::scale(self, s)
    }
    fn offset(&self, s: f64) -> Jet {
        Jet::offset(self, s)
    }
    fn sqrt(&self) -> Jet {
        Jet::sqrt(self)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
