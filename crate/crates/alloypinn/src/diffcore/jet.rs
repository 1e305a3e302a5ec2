//! Second-order forward-mode scalars.
//!
//! A [`JetValue`] carries a value together with the first and second
//! derivative with respect to one designated input coordinate. Arithmetic
//! follows second-order Taylor propagation, e.g. for a product h = f·g,
//! h.d2 = f.d2·g.v + 2·f.d1·g.d1 + f.v·g.d2.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::erf;

/// Value plus first and second derivative with respect to one input.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct JetValue {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl JetValue {
    /// Seed an input coordinate: (v = x, d1 = 1, d2 = 0).
    #[inline]
    pub fn seed(x: f64) -> Self {
        Self { v: x, d1: 1.0, d2: 0.0 }
    }

    /// A constant: (v = c, d1 = 0, d2 = 0).
    #[inline]
    pub fn constant(c: f64) -> Self {
        Self { v: c, d1: 0.0, d2: 0.0 }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.v.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }

    /// Chain rule for a scalar function with derivatives f', f'' at `self.v`.
    #[inline]
    pub fn chain(self, fv: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: fv,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }

    #[inline]
    pub fn powi(self, n: i32) -> Self {
        let fv = self.v.powi(n);
        let f1 = n as f64 * self.v.powi(n - 1);
        let f2 = (n * (n - 1)) as f64 * self.v.powi(n - 2);
        self.chain(fv, f1, f2)
    }
}

impl Add for JetValue {
    type Output = Self;
    #[inline]
    fn add(self, r: Self) -> Self {
        Self { v: self.v + r.v, d1: self.d1 + r.d1, d2: self.d2 + r.d2 }
    }
}

impl Sub for JetValue {
    type Output = Self;
    #[inline]
    fn sub(self, r: Self) -> Self {
        Self { v: self.v - r.v, d1: self.d1 - r.d1, d2: self.d2 - r.d2 }
    }
}

impl Mul for JetValue {
    type Output = Self;
    #[inline]
    fn mul(self, r: Self) -> Self {
        Self {
            v: self.v * r.v,
            d1: self.d1 * r.v + self.v * r.d1,
            d2: self.d2 * r.v + 2.0 * self.d1 * r.d1 + self.v * r.d2,
        }
    }
}

impl Div for JetValue {
    type Output = Self;
    #[inline]
    fn div(self, r: Self) -> Self {
        // From f = h·g: solve each Taylor order for h in turn.
        let v = self.v / r.v;
        let d1 = (self.d1 - v * r.d1) / r.v;
        let d2 = (self.d2 - 2.0 * d1 * r.d1 - v * r.d2) / r.v;
        Self { v, d1, d2 }
    }
}

impl Neg for JetValue {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }
}

impl Mul<f64> for JetValue {
    type Output = Self;
    #[inline]
    fn mul(self, c: f64) -> Self {
        Self { v: self.v * c, d1: self.d1 * c, d2: self.d2 * c }
    }
}

/// Scalar type abstraction so closed-form field evaluators can run on plain
/// values or on jets (for residual substitution checks).
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn erf(self) -> Self;
    fn erfc(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn erf(self) -> Self {
        erf::erf(self)
    }
    #[inline]
    fn erfc(self) -> Self {
        erf::erfc(self)
    }
}

impl Real for JetValue {
    #[inline]
    fn from_f64(c: f64) -> Self {
        Self::constant(c)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }
    #[inline]
    fn erf(self) -> Self {
        let g = erf::erf_prime(self.v);
        self.chain(erf::erf(self.v), g, -2.0 * self.v * g)
    }
    #[inline]
    fn erfc(self) -> Self {
        let g = erf::erf_prime(self.v);
        self.chain(erf::erfc(self.v), -g, 2.0 * self.v * g)
    }
}

/// Logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// swish(x) = x·sigmoid(x) and its first three derivatives, from one
/// sigmoid evaluation. The activation backward pass needs the third
/// derivative because second input derivatives ride through it.
#[inline]
pub fn swish_derivs(x: f64) -> (f64, f64, f64, f64) {
    let s = sigmoid(x);
    let s1 = s * (1.0 - s);
    let s2 = s1 * (1.0 - 2.0 * s);
    let s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
    let w = x * s;
    let w1 = s + x * s1;
    let w2 = 2.0 * s1 + x * s2;
    let w3 = 3.0 * s2 + x * s3;
    (w, w1, w2, w3)
}

impl JetValue {
    /// swish(x) = x·sigmoid(x) with jet propagation.
    #[inline]
    pub fn swish(self) -> Self {
        let (w, w1, w2, _) = swish_derivs(self.v);
        self.chain(w, w1, w2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        (d1, d2)
    }

    #[test]
    fn swish_jet_at_zero() {
        // sigma(0) = 0.5, sigma'(0) = 0.25 so swish'(0) = 0.5, swish''(0) = 0.5
        let j = JetValue::seed(0.0).swish();
        assert_eq!(j.v, 0.0);
        assert!((j.d1 - 0.5).abs() < 1e-15);
        assert!((j.d2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn swish_scalar_values() {
        let (w, _, _, _) = swish_derivs(1.0);
        assert!((w - 7.31058578630004896e-01).abs() < 1e-15);
        // global minimum of x*sigmoid(x), found numerically
        let (wmin, w1, _, _) = swish_derivs(-1.27846454276107369);
        assert!((wmin + 2.78464542761073797e-01).abs() < 1e-14);
        assert!(w1.abs() < 1e-14);
        // bounded below, approaching 0 from below for very negative x
        let (far, _, _, _) = swish_derivs(-40.0);
        assert!(far < 0.0 && far > -1e-15);
    }

    #[test]
    fn swish_third_derivative_matches_fd() {
        for &x in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
            let h = 1e-5;
            let (_, _, _, w3) = swish_derivs(x);
            let fd = (swish_derivs(x + h).2 - swish_derivs(x - h).2) / (2.0 * h);
            assert!((w3 - fd).abs() < 1e-6, "x = {x}: {w3} vs {fd}");
        }
    }

    proptest! {
        // Taylor-mode product/chain rules versus central finite differences on
        // a random composite expression g(x) = swish(a·x + b)·erf(x·c) + x²/ (x² + 2).
        #[test]
        fn jet_matches_finite_differences(
            x in -2.0f64..2.0,
            a in -1.5f64..1.5,
            b in -1.0f64..1.0,
            c in 0.1f64..1.5,
        ) {
            let g = |t: f64| {
                let (w, _, _, _) = swish_derivs(a * t + b);
                w * erf::erf(t * c) + t * t / (t * t + 2.0)
            };
            let gj = |t: JetValue| {
                let two = JetValue::constant(2.0);
                (t * a + JetValue::constant(b)).swish() * (t * c).erf()
                    + t * t / (t * t + two)
            };
            let j = gj(JetValue::seed(x));
            prop_assert!((j.v - g(x)).abs() < 1e-12);
            let h = 1e-4 * x.abs().max(1.0);
            let (d1, d2) = fd2(g, x, h);
            let s1 = d1.abs().max(1.0);
            let s2 = d2.abs().max(1.0);
            prop_assert!((j.d1 - d1).abs() / s1 < 1e-6, "d1 {} vs {}", j.d1, d1);
            prop_assert!((j.d2 - d2).abs() / s2 < 1e-4, "d2 {} vs {}", j.d2, d2);
        }

        #[test]
        fn seeding_and_constants(x in -5.0f64..5.0) {
            let s = JetValue::seed(x);
            prop_assert_eq!(s.v, x);
            prop_assert_eq!(s.d1, 1.0);
            prop_assert_eq!(s.d2, 0.0);
            let c = JetValue::constant(x);
            prop_assert_eq!(c.d1, 0.0);
            prop_assert_eq!(c.d2, 0.0);
        }
    }

    #[test]
    fn division_consistency() {
        // (f/g)*g == f through second order
        let f = JetValue { v: 1.3, d1: -0.7, d2: 0.4 };
        let g = JetValue { v: 0.6, d1: 1.1, d2: -2.0 };
        let back = (f / g) * g;
        assert!((back.v - f.v).abs() < 1e-14);
        assert!((back.d1 - f.d1).abs() < 1e-14);
        assert!((back.d2 - f.d2).abs() < 1e-13);
    }
}
