//! One-dimensional calculus for the Moser iteration: smoothing operators
//! `S(t)`, a reflection extension operator, and empirical checks of the
//! smoothing and interpolation estimates in discrete Hölder norms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::curve::{holder_norm_curve, Curve1D};
use crate::error::{Error, Result};
use crate::grid::{holder_norm_field, Field2D};

/// Hölder exponent used by every graded-norm check.
pub const ALPHA: f64 = 0.5;

/// Parameters of the smoothing family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingFamily {
    /// Full pass below `pass * t`.
    pub pass: f64,
    /// Zero above `stop * t`.
    pub stop: f64,
}

impl Default for SmoothingFamily {
    fn default() -> Self {
        Self { pass: 0.8, stop: 1.2 }
    }
}

impl SmoothingFamily {
    /// Raised-cosine transfer factor of cosine mode `k`.
    pub fn factor(&self, k: f64, t: f64) -> f64 {
        let (a, b) = (self.pass * t, self.stop * t);
        if k <= a {
            1.0
        } else if k >= b {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (k - a) / (b - a)).cos())
        }
    }

    /// Smallest `t` for which every mode of an `n`-sample grid passes unchanged.
    pub fn identity_threshold(&self, n: usize) -> f64 {
        (n - 1) as f64 / self.pass
    }

    /// `S(t) f`: the even reflection of `f` about both endpoints (a function
    /// of period `2L`) is expanded in cosine modes `cos(πkx/L)`, mode `k` is
    /// multiplied by the taper, and the result is restricted to the domain.
    ///
    /// The reflection has a kink wherever `f′ ≠ 0` at an endpoint, which the
    /// taper would spread into a boundary layer. Before filtering, the
    /// quadratics carrying the end slopes are split off and passed through
    /// unfiltered; their weights are fitted by least squares to the cosine
    /// coefficients above `(n−1)/4`, where a smooth remainder has no content.
    /// A constant or a bandlimited `f` has a zero tail, so the split vanishes.
    pub fn smooth(&self, f: &Curve1D, t: f64) -> Curve1D {
        assert!(t > 0.0, "smoothing parameter must be positive");
        let n = f.len();
        let mut c = cosine_coefficients(&f.values);
        let basis = slope_basis(n);
        let tail = (n - 1) / 4;
        let weights = if tail >= 4 { fit_tail(&c, &basis, tail) } else { [0.0; 2] };
        let split = |k: usize| weights[0] * basis[0][k] + weights[1] * basis[1][k];
        for (k, ck) in c.iter_mut().enumerate() {
            let p = split(k);
            *ck = p + self.factor(k as f64, t) * (*ck - p);
        }
        Curve1D::new(f.lo, f.hi, from_cosine_coefficients(&c))
    }
}

/// Coefficients `c_k`, `0 ≤ k < n`, of the even `2(n−1)`-periodic reflection,
/// normalized so that [`from_cosine_coefficients`] inverts them.
fn cosine_coefficients(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let m = 2 * (n - 1);
    let mut buf: Vec<Complex<f64>> = (0..m).map(|i| Complex::new(if i < n { v[i] } else { v[m - i] }, 0.0)).collect();
    plan(m, true).process(&mut buf);
    buf[..n].iter().map(|z| z.re / m as f64).collect()
}

fn from_cosine_coefficients(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let m = 2 * (n - 1);
    let mut buf: Vec<Complex<f64>> = (0..m).map(|i| Complex::new(if i < n { c[i] } else { c[m - i] }, 0.0)).collect();
    plan(m, false).process(&mut buf);
    buf[..n].iter().map(|z| z.re).collect()
}

type SlopeBasis = [Vec<f64>; 2];

/// Cosine coefficients of `x − x²/2L` and `x²/2L` (unit slope
/// at the left and right end respectively), in index units.
fn slope_basis(n: usize) -> Arc<SlopeBasis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SlopeBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().unwrap().get(&n) {
        return b.clone();
    }
    let l = (n - 1) as f64;
    let right: Vec<f64> = (0..n).map(|i| (i * i) as f64 / (2.0 * l)).collect();
    let left: Vec<f64> = (0..n).map(|i| i as f64 - right[i]).collect();
    let b = Arc::new([cosine_coefficients(&left), cosine_coefficients(&right)]);
    cache.lock().unwrap().insert(n, b.clone());
    b
}

/// Least-squares weights of the two slope quadratics matching `c` on modes `k ≥ tail`.
fn fit_tail(c: &[f64], basis: &SlopeBasis, tail: usize) -> [f64; 2] {
    let (p, q) = (&basis[0], &basis[1]);
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in tail..c.len() {
        a11 += p[k] * p[k];
        a12 += p[k] * q[k];
        a22 += q[k] * q[k];
        b1 += p[k] * c[k];
        b2 += q[k] * c[k];
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-12 * a11 * a22) {
        return [0.0; 2];
    }
    [(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det]
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    type PlanCache = Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>;
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap();
    let (planner, map) = &mut *guard;
    map.entry((n, forward))
        .or_insert_with(|| if forward { planner.plan_fft_forward(n) } else { planner.plan_fft_inverse(n) })
        .clone()
}

/// `S(t) f` with the default family.
pub fn smooth(f: &Curve1D, t: f64) -> Curve1D {
    SmoothingFamily::default().smooth(f, t)
}

/// Empirical constants of the smoothing estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingReport {
    /// `max_t |S(t)f|_m / (t^{m−l} |f|_l)`
    pub gain: f64,
    /// `max_t |f − S(t)f|_l / (t^{l−m} |f|_m)`
    pub approximation: f64,
}

fn is_constant(f: &Curve1D) -> bool {
    let c = f.values[0];
    f.values.iter().all(|v| (v - c).abs() <= 1e-14 * c.abs().max(1.0))
}

/// Measures both smoothing estimates for `f` over the list of `t` values.
/// Constants are fixed by every `S(t)` and report zero.
pub fn verify_smoothing(f: &Curve1D, m: usize, l: usize, ts: &[f64]) -> SmoothingReport {
    assert!(m >= l);
    if is_constant(f) {
        return SmoothingReport { gain: 0.0, approximation: 0.0 };
    }
    let fl = holder_norm_curve(f, l, ALPHA);
    let fm = holder_norm_curve(f, m, ALPHA);
    let mut gain = 0.0f64;
    let mut approx = 0.0f64;
    let d = (m - l) as i32;
    for &t in ts {
        let s = smooth(f, t);
        let num1 = holder_norm_curve(&s, m, ALPHA);
        let num2 = holder_norm_curve(&f.sub(&s), l, ALPHA);
        gain = gain.max(guarded_ratio(num1, t.powi(d) * fl));
        approx = approx.max(guarded_ratio(num2, t.powi(-d) * fm));
    }
    SmoothingReport { gain, approximation: approx }
}

fn guarded_ratio(num: f64, den: f64) -> f64 {
    if num <= 1e-300 && den <= 1e-300 {
        0.0
    } else {
        num / den.max(1e-300)
    }
}

/// Objects carrying discrete Hölder norms.
pub trait Graded {
    fn holder(&self, n: usize, alpha: f64) -> f64;
}

impl Graded for Curve1D {
    fn holder(&self, n: usize, alpha: f64) -> f64 {
        holder_norm_curve(self, n, alpha)
    }
}

impl Graded for Field2D {
    fn holder(&self, n: usize, alpha: f64) -> f64 {
        holder_norm_field(self, n, alpha)
    }
}

/// Interpolation-inequality ratio `|f|_i / (|f|_m^{(l−i)/(l−m)} |f|_l^{(i−m)/(l−m)})`.
pub fn interp_check<F: Graded>(f: &F, i: usize, m: usize, l: usize) -> Result<f64> {
    assert!(m <= i && i <= l);
    let nm = f.holder(m, ALPHA);
    let nl = f.holder(l, ALPHA);
    if nm < 1e-14 || nl < 1e-14 {
        return Err(Error::DegenerateNorm(nm.min(nl)));
    }
    if l == m || i == m {
        return Ok(1.0);
    }
    if i == l {
        return Ok(1.0);
    }
    let ni = f.holder(i, ALPHA);
    let a = (l - i) as f64 / (l - m) as f64;
    let b = (i - m) as f64 / (l - m) as f64;
    Ok(ni / (nm.powf(a) * nl.powf(b)))
}

/// C^∞ step rising from 0 at `s <= 0` to 1 at `s >= 1`.
fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// Hestenes reflection weights: `f(−x)` is continued as `Σ c_q f(b_q x)` with
/// `b_q = 1/(q+1)` and derivatives matched through order three.
fn hestenes_weights() -> ([f64; 4], [f64; 4]) {
    let b = [1.0, 0.5, 1.0 / 3.0, 0.25];
    let a: Vec<Vec<f64>> = (0..4).map(|j| b.iter().map(|bq: &f64| (-bq).powi(j)).collect()).collect();
    let c = crate::fd::solve_dense_small(a, vec![1.0; 4]);
    ([c[0], c[1], c[2], c[3]], b)
}

/// Extension of `f` from `[lo, hi]` to `[lo − D, hi + D]` (D rounded to whole
/// cells): reflection across each endpoint matching three derivatives,
/// multiplied by a smooth cutoff that is 1 on the core and 0 at the new ends.
pub fn extend(f: &Curve1D, margin: f64) -> Curve1D {
    assert!(margin > 0.0);
    let h = f.h();
    let cells = (margin / h).round().max(1.0) as usize;
    let d = cells as f64 * h;
    let (c, b) = hestenes_weights();
    let n = f.len() + 2 * cells;
    let (lo, hi) = (f.lo, f.hi);
    let l = hi - lo;
    let values = (0..n)
        .map(|i| {
            if i >= cells && i < cells + f.len() {
                return f.values[i - cells];
            }
            let x = lo - d + i as f64 * h;
            let (v, dist) = if x < lo {
                let y = lo - x;
                ((0..4).map(|q| c[q] * f.eval(lo + (b[q] * y).min(l))).sum::<f64>(), y)
            } else {
                let y = x - hi;
                ((0..4).map(|q| c[q] * f.eval(hi - (b[q] * y).min(l))).sum::<f64>(), y)
            };
            v * smooth_step(1.0 - dist / d)
        })
        .collect();
    Curve1D::new(lo - d, hi + d, values)
}
