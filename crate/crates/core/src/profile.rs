//! Vorticity profiles `F` on a fixed interval, with derivative access.

use serde::{Deserialize, Serialize};

use crate::curve::Curve1D;
use crate::fd;
use crate::grid::Field2D;

/// Default number of profile samples.
pub const DEFAULT_PROFILE_SAMPLES: usize = 1025;

/// Real function on a fixed interval `I = [lo, hi]`, sampled uniformly with a
/// C¹ cubic interpolant. Strictly increasing sample sets get Fritsch-Carlson
/// limited slopes so the interpolant stays monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile1D {
    pub curve: Curve1D,
}

impl Profile1D {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Self {
        let h = (hi - lo) / (values.len() - 1) as f64;
        let slopes = fd::spline_slopes(&values, h);
        Self::with_slopes(lo, hi, values, slopes)
    }

    pub fn with_slopes(lo: f64, hi: f64, values: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        let h = (hi - lo) / (values.len() - 1) as f64;
        if values.windows(2).all(|w| w[1] > w[0]) {
            for i in 0..values.len() - 1 {
                let delta = (values[i + 1] - values[i]) / h;
                let a = slopes[i].max(0.0) / delta;
                let b = slopes[i + 1].max(0.0) / delta;
                let r2 = a * a + b * b;
                if r2 > 9.0 {
                    let tau = 3.0 / r2.sqrt();
                    slopes[i] = tau * a * delta;
                    slopes[i + 1] = tau * b * delta;
                }
            }
        }
        Self { curve: Curve1D::with_slopes(lo, hi, values, slopes) }
    }

    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / (n - 1) as f64;
        Self::new(lo, hi, (0..n).map(|i| f(lo + i as f64 * h)).collect())
    }

    /// Samples `f` with exact node slopes `df`.
    pub fn from_fn_with_derivative(
        lo: f64,
        hi: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Self {
        let h = (hi - lo) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        Self::with_slopes(lo, hi, xs.iter().map(|&x| f(x)).collect(), xs.iter().map(|&x| df(x)).collect())
    }

    pub fn zeros(lo: f64, hi: f64, n: usize) -> Self {
        Self { curve: Curve1D::with_slopes(lo, hi, vec![0.0; n], vec![0.0; n]) }
    }

    pub fn lo(&self) -> f64 {
        self.curve.lo
    }
    pub fn hi(&self) -> f64 {
        self.curve.hi
    }
    pub fn len(&self) -> usize {
        self.curve.len()
    }
    pub fn is_empty(&self) -> bool {
        self.curve.is_empty()
    }
    pub fn eval(&self, s: f64) -> f64 {
        self.curve.eval(s)
    }
    pub fn deriv(&self, s: f64) -> f64 {
        self.curve.deriv(s)
    }
    pub fn deriv2(&self, s: f64) -> f64 {
        self.curve.deriv2(s)
    }
    pub fn nodes(&self) -> Vec<f64> {
        self.curve.nodes()
    }
    pub fn values(&self) -> &[f64] {
        &self.curve.values
    }

    /// `F′ > 0` at every node and segment midpoint.
    pub fn is_strictly_increasing(&self) -> bool {
        let c = &self.curve;
        let h = c.h();
        (0..c.len()).all(|i| self.deriv(c.node(i)) > 0.0)
            && (0..c.len() - 1).all(|i| self.deriv(c.node(i) + 0.5 * h) > 0.0)
    }

    /// Smallest derivative over nodes and midpoints of `[a, b]`.
    pub fn min_slope_on(&self, a: f64, b: f64) -> f64 {
        let c = &self.curve;
        let h = c.h();
        let mut m = f64::INFINITY;
        for i in 0..2 * (c.len() - 1) + 1 {
            let s = c.lo + 0.5 * h * i as f64;
            if s >= a - 1e-12 && s <= b + 1e-12 {
                m = m.min(self.deriv(s));
            }
        }
        m.min(self.deriv(a)).min(self.deriv(b))
    }

    pub fn compose(&self, psi: &Field2D) -> Field2D {
        psi.map(|v| self.eval(v))
    }

    pub fn compose_deriv(&self, psi: &Field2D) -> Field2D {
        psi.map(|v| self.deriv(v))
    }

    pub fn compose_deriv2(&self, psi: &Field2D) -> Field2D {
        psi.map(|v| self.deriv2(v))
    }

    pub fn lincomb(&self, a: f64, other: &Profile1D, b: f64) -> Profile1D {
        Profile1D { curve: self.curve.lincomb(a, &other.curve, b) }
    }

    pub fn add(&self, other: &Profile1D) -> Profile1D {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn scale(&self, a: f64) -> Profile1D {
        Profile1D { curve: self.curve.scale(a) }
    }

    /// Sup distance of node values on `[a, b]`.
    pub fn dist_on(&self, other: &Profile1D, a: f64, b: f64) -> f64 {
        let mut d = 0.0f64;
        for (i, x) in self.nodes().into_iter().enumerate() {
            if x >= a && x <= b {
                d = d.max((self.curve.values[i] - other.eval(x)).abs());
            }
        }
        let n = 64;
        for i in 0..=n {
            let x = a + (b - a) * i as f64 / n as f64;
            d = d.max((self.eval(x) - other.eval(x)).abs());
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_profile_is_exact() {
        let p = Profile1D::from_fn(-2.0, 0.0, 33, |s| 0.5 * s - 1.0);
        assert!(p.is_strictly_increasing());
        for i in 0..50 {
            let s = -2.0 + 2.0 * i as f64 / 49.0;
            assert!((p.eval(s) - (0.5 * s - 1.0)).abs() < 1e-13);
            assert!((p.deriv(s) - 0.5).abs() < 1e-12);
            assert!(p.deriv2(s).abs() < 1e-10);
        }
    }

    #[test]
    fn smooth_profile_derivatives() {
        let p = Profile1D::from_fn(-2.0, 0.0, 129, |s| s + 0.2 * s.sin());
        for i in 0..50 {
            let s = -2.0 + 2.0 * i as f64 / 49.0;
            assert!((p.deriv(s) - (1.0 + 0.2 * s.cos())).abs() < 1e-6);
            assert!((p.deriv2(s) + 0.2 * s.sin()).abs() < 1e-3);
        }
    }
}
