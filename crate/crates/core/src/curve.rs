//! Uniformly sampled 1D functions with cubic Hermite interpolants, the
//! strictly increasing variant used for distribution functions, and discrete
//! Hölder norms of curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;

/// Function on `[lo, hi]` sampled at `n` uniform nodes with a C¹ cubic
/// Hermite interpolant. Node slopes default to the clamped cubic spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve1D {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl Curve1D {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 5 && hi > lo, "curve needs >= 5 samples on a proper interval");
        let h = (hi - lo) / (values.len() - 1) as f64;
        let slopes = fd::spline_slopes(&values, h);
        Self { lo, hi, values, slopes }
    }

    pub fn with_slopes(lo: f64, hi: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert_eq!(values.len(), slopes.len());
        assert!(values.len() >= 2 && hi > lo);
        Self { lo, hi, values, slopes }
    }

    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / (n - 1) as f64;
        Self::new(lo, hi, (0..n).map(|i| f(lo + i as f64 * h)).collect())
    }

    pub fn zeros_like(&self) -> Self {
        Self::with_slopes(self.lo, self.hi, vec![0.0; self.len()], vec![0.0; self.len()])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.len() - 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.h();
        let n = self.len();
        let p = (x - self.lo) / h;
        let i = (p.floor().max(0.0) as usize).min(n - 2);
        (i, p - i as f64)
    }

    /// Value, first and second derivative of the interpolant. Points slightly
    /// outside the domain use the end segment's polynomial.
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        let (i, u) = self.locate(x);
        fd::hermite_eval(self.values[i], self.values[i + 1], self.slopes[i], self.slopes[i + 1], self.h(), u)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval3(x).0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.eval3(x).1
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        self.eval3(x).2
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn same_grid(&self, o: &Curve1D) -> bool {
        self.len() == o.len() && self.lo == o.lo && self.hi == o.hi
    }

    /// Linear combination `a*self + b*other` of samples and slopes.
    pub fn lincomb(&self, a: f64, other: &Curve1D, b: f64) -> Curve1D {
        assert!(self.same_grid(other), "curves live on different grids");
        Curve1D {
            lo: self.lo,
            hi: self.hi,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
            slopes: self.slopes.iter().zip(&other.slopes).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn add(&self, o: &Curve1D) -> Curve1D {
        self.lincomb(1.0, o, 1.0)
    }

    pub fn sub(&self, o: &Curve1D) -> Curve1D {
        self.lincomb(1.0, o, -1.0)
    }

    pub fn scale(&self, a: f64) -> Curve1D {
        Curve1D {
            lo: self.lo,
            hi: self.hi,
            values: self.values.iter().map(|v| a * v).collect(),
            slopes: self.slopes.iter().map(|v| a * v).collect(),
        }
    }

    /// Sup distance of samples (same grid) or of `other` evaluated at our nodes.
    pub fn dist(&self, other: &Curve1D) -> f64 {
        if self.same_grid(other) {
            self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
        } else {
            (0..self.len()).fold(0.0, |m, i| m.max((self.values[i] - other.eval(self.node(i))).abs()))
        }
    }

    /// Resamples the interpolant on a new uniform grid of the same interval.
    pub fn resample(&self, n: usize) -> Curve1D {
        let h = (self.hi - self.lo) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| self.lo + i as f64 * h).collect();
        Curve1D::with_slopes(
            self.lo,
            self.hi,
            xs.iter().map(|&x| self.eval(x)).collect(),
            xs.iter().map(|&x| self.deriv(x)).collect(),
        )
    }

    /// Sample-wise derivative of order `order` by repeated fourth-order differences.
    pub fn fd_derivative(&self, order: usize) -> Vec<f64> {
        let mut d = self.values.clone();
        for _ in 0..order {
            d = fd::deriv4(&d, self.h());
        }
        d
    }
}

/// Discrete Hölder norm of a curve: `max_{j<=n} sup|f^(j)| + sum_{j<=n} [f^(j)]_alpha`,
/// with the seminorm taken over all node pairs.
pub fn holder_norm_curve(f: &Curve1D, n: usize, alpha: f64) -> f64 {
    let xs = f.nodes();
    let mut sup = 0.0f64;
    let mut semi = 0.0;
    for j in 0..=n {
        let d = f.fd_derivative(j);
        sup = sup.max(d.iter().fold(0.0, |m, v| m.max(v.abs())));
        semi += holder_seminorm(&xs, &d, alpha);
    }
    sup + semi
}

/// `max |f(x)-f(y)| / |x-y|^alpha` over all pairs of samples.
pub fn holder_seminorm(xs: &[f64], f: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0f64;
    for a in 0..xs.len() {
        for b in a + 1..xs.len() {
            s = s.max((f[a] - f[b]).abs() / (xs[b] - xs[a]).abs().powf(alpha));
        }
    }
    s
}

/// Strictly increasing sampled function with a monotone cubic interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monotone1D {
    pub curve: Curve1D,
}

impl Monotone1D {
    /// Builds from samples; slopes from the spline, limited Fritsch-Carlson style.
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        let h = (hi - lo) / (values.len() - 1) as f64;
        let slopes = fd::spline_slopes(&values, h);
        Self::with_slopes(lo, hi, values, slopes)
    }

    /// Builds from samples and slope estimates; slopes are limited so every
    /// segment stays monotone.
    pub fn with_slopes(lo: f64, hi: f64, values: Vec<f64>, mut slopes: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let h = (hi - lo) / (n - 1) as f64;
        let min_gap = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if !(min_gap > 0.0) {
            return Err(Error::NotMonotone { min_gap });
        }
        for s in slopes.iter_mut() {
            if *s < 0.0 {
                *s = 0.0;
            }
        }
        for i in 0..n - 1 {
            let delta = (values[i + 1] - values[i]) / h;
            let a = slopes[i] / delta;
            let b = slopes[i + 1] / delta;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                slopes[i] = tau * a * delta;
                slopes[i + 1] = tau * b * delta;
            }
        }
        Ok(Self { curve: Curve1D::with_slopes(lo, hi, values, slopes) })
    }

    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (hi - lo) / (n - 1) as f64;
        Self::new(lo, hi, (0..n).map(|i| f(lo + i as f64 * h)).collect())
    }

    pub fn lo(&self) -> f64 {
        self.curve.lo
    }
    pub fn hi(&self) -> f64 {
        self.curve.hi
    }
    pub fn y_lo(&self) -> f64 {
        self.curve.values[0]
    }
    pub fn y_hi(&self) -> f64 {
        *self.curve.values.last().unwrap()
    }
    pub fn eval(&self, x: f64) -> f64 {
        self.curve.eval(x)
    }
    pub fn deriv(&self, x: f64) -> f64 {
        self.curve.deriv(x)
    }
    pub fn len(&self) -> usize {
        self.curve.len()
    }
    pub fn is_empty(&self) -> bool {
        self.curve.is_empty()
    }

    /// Solves `self(x) = y` by Newton steps safeguarded with bisection.
    pub fn invert(&self, y: f64) -> f64 {
        let c = &self.curve;
        let n = c.len();
        if y <= c.values[0] {
            return c.lo + (y - c.values[0]) / c.slopes[0].max(1e-300).max((c.values[1] - c.values[0]) / c.h());
        }
        if y >= c.values[n - 1] {
            let d = c.slopes[n - 1].max((c.values[n - 1] - c.values[n - 2]) / c.h());
            return c.hi + (y - c.values[n - 1]) / d.max(1e-300);
        }
        // Bracket by binary search on samples.
        let i = match c.values.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(i) => return c.node(i),
            Err(i) => i - 1,
        };
        let h = c.h();
        let (f0, f1, m0, m1) = (c.values[i], c.values[i + 1], c.slopes[i], c.slopes[i + 1]);
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut u = (y - f0) / (f1 - f0);
        for _ in 0..100 {
            let (v, d, _) = fd::hermite_eval(f0, f1, m0, m1, h, u);
            let r = v - y;
            if r > 0.0 {
                b = u;
            } else {
                a = u;
            }
            let du = d * h;
            let mut next = if du > 0.0 { u - r / du } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - u).abs() < 1e-15 || b - a < 1e-15 {
                u = next;
                break;
            }
            u = next;
        }
        c.lo + (i as f64 + u) * h
    }

    /// Inverse function sampled on `n` uniform nodes of the value range, with
    /// slopes `1 / f'(f^{-1}(y))`.
    pub fn inverse(&self, n: usize) -> Result<Monotone1D> {
        let (ylo, yhi) = (self.y_lo(), self.y_hi());
        let hy = (yhi - ylo) / (n - 1) as f64;
        let mut xs = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        for i in 0..n {
            let y = if i == n - 1 { yhi } else { ylo + i as f64 * hy };
            let x = if i == 0 {
                self.lo()
            } else if i == n - 1 {
                self.hi()
            } else {
                self.invert(y)
            };
            xs.push(x);
            let d = self.deriv(x);
            slopes.push(if d > 0.0 { 1.0 / d } else { f64::INFINITY });
        }
        // Slopes that are infinite (zero derivative) fall back to spline estimates.
        if slopes.iter().any(|s| !s.is_finite()) {
            let est = fd::spline_slopes(&xs, hy);
            for (s, e) in slopes.iter_mut().zip(est) {
                if !s.is_finite() {
                    *s = e;
                }
            }
        }
        Monotone1D::with_slopes(ylo, yhi, xs, slopes)
    }

    fn as_curve(&self) -> &Curve1D {
        &self.curve
    }
}

impl AsRef<Curve1D> for Monotone1D {
    fn as_ref(&self) -> &Curve1D {
        self.as_curve()
    }
}

/// Inverse of a strictly increasing curve, sampled on the same number of nodes.
pub fn invert_monotone(f: &Curve1D) -> Result<Curve1D> {
    let min_slope = f.fd_derivative(1).into_iter().fold(f64::INFINITY, f64::min);
    let min_gap = f.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(min_slope > 1e-10) || !(min_gap > 0.0) {
        return Err(Error::NotMonotone { min_gap: min_gap.min(min_slope) });
    }
    let m = Monotone1D::with_slopes(f.lo, f.hi, f.values.clone(), f.slopes.clone())?;
    Ok(m.inverse(f.len())?.curve)
}
