//! Independent reference computations used to validate the 2D solvers:
//! radial two-point problems by shooting, sublevel areas by root finding
//! along rays, and the degenerate shift of the radially reduced operator.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{AnnulusGrid, ONE_SIDED_D1};

/// A radial solution sampled on a fine uniform grid, with derivative.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
}

impl RadialSolution {
    /// Cubic Hermite evaluation at radius `r`.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        let h = self.r[1] - self.r[0];
        let u = ((r - self.r[0]) / h).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        crate::fd::hermite_eval(self.psi[i], self.psi[i + 1], self.dpsi[i], self.dpsi[i + 1], h, u - i as f64).0
    }

    pub fn min(&self) -> f64 {
        self.psi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Inner boundary value `ψ(R_i)`.
    pub fn inner(&self) -> f64 {
        self.psi[0]
    }
}

/// RK4 for `(y, y′)′ = (y′, rhs(r, y) − y′/r)` from `ri` with the given data.
fn shoot(
    rhs: &dyn Fn(f64, f64) -> f64,
    ri: f64,
    ro: f64,
    steps: usize,
    y0: f64,
    dy0: f64,
) -> RadialSolution {
    let h = (ro - ri) / steps as f64;
    let mut r = vec![0.0; steps + 1];
    let mut y = vec![0.0; steps + 1];
    let mut dy = vec![0.0; steps + 1];
    let (mut a, mut b) = (y0, dy0);
    let f = |x: f64, a: f64, b: f64| (b, rhs(x, a) - b / x);
    for i in 0..steps {
        let x = ri + i as f64 * h;
        r[i] = x;
        y[i] = a;
        dy[i] = b;
        let (k1a, k1b) = f(x, a, b);
        let (k2a, k2b) = f(x + 0.5 * h, a + 0.5 * h * k1a, b + 0.5 * h * k1b);
        let (k3a, k3b) = f(x + 0.5 * h, a + 0.5 * h * k2a, b + 0.5 * h * k2b);
        let (k4a, k4b) = f(x + h, a + h * k3a, b + h * k3b);
        a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        b += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    }
    r[steps] = ro;
    y[steps] = a;
    dy[steps] = b;
    RadialSolution { r, psi: y, dpsi: dy }
}

/// Radial solution of `ψ″ + ψ′/r = F(ψ)` on `[ri, ro]` with `ψ(ro) = 0` and
/// circulation `γ = −2π ri ψ′(ri)`, by shooting on the inner value with a
/// secant iteration.
pub fn radial_steady(f: &dyn Fn(f64) -> f64, ri: f64, ro: f64, gamma: f64, steps: usize) -> Result<RadialSolution> {
    let dy0 = -gamma / (2.0 * PI * ri);
    let rhs = |_: f64, y: f64| f(y);
    let end = |c: f64| *shoot(&rhs, ri, ro, steps, c, dy0).psi.last().unwrap();
    // Harmonic guess: ψ = ri ψ′(ri) ln(r/ro).
    let mut c0 = ri * dy0 * (ri / ro).ln();
    let mut c1 = c0 - 0.1 * (1.0 + c0.abs());
    let (mut e0, mut e1) = (end(c0), end(c1));
    for _ in 0..100 {
        if e1.abs() < 1e-13 {
            return Ok(shoot(&rhs, ri, ro, steps, c1, dy0));
        }
        let c2 = c1 - e1 * (c1 - c0) / (e1 - e0);
        c0 = c1;
        e0 = e1;
        c1 = c2;
        e1 = end(c1);
        if !e1.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: 100, residual: e1.abs() })
}

/// Radial solution of `φ″ + φ′/r − q(r)φ = s(r)` with `φ(ro) = 0` and zero
/// circulation `φ′(ri) = 0`; linear, so two shots suffice.
pub fn radial_linear(q: &dyn Fn(f64) -> f64, s: &dyn Fn(f64) -> f64, ri: f64, ro: f64, steps: usize) -> RadialSolution {
    let full = |r: f64, y: f64| q(r) * y + s(r);
    let hom = |r: f64, y: f64| q(r) * y;
    let p = shoot(&full, ri, ro, steps, 0.0, 0.0);
    let u = shoot(&hom, ri, ro, steps, 1.0, 0.0);
    let c = -p.psi.last().unwrap() / u.psi.last().unwrap();
    RadialSolution {
        r: p.r.clone(),
        psi: p.psi.iter().zip(&u.psi).map(|(a, b)| a + c * b).collect(),
        dpsi: p.dpsi.iter().zip(&u.dpsi).map(|(a, b)| a + c * b).collect(),
    }
}

/// Area of `{ω < λ}` for a field that increases along every ray from the
/// inner to the outer circle: the crossing radius `ρ(θ)` is found by
/// bisection and `∫ ½(ρ² − ri²) dθ` by the periodic trapezoid rule.
pub fn ray_area(omega: &dyn Fn(f64, f64) -> f64, ri: f64, ro: f64, lambda: f64, n_theta: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..n_theta {
        let t = 2.0 * PI * k as f64 / n_theta as f64;
        let (mut a, mut b) = (ri, ro);
        if omega(a, t) >= lambda {
            continue;
        }
        if omega(b, t) <= lambda {
            sum += 0.5 * (ro * ro - ri * ri);
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if omega(m, t) < lambda {
                a = m;
            } else {
                b = m;
            }
        }
        let rho = 0.5 * (a + b);
        sum += 0.5 * (rho * rho - ri * ri);
    }
    sum * 2.0 * PI / n_theta as f64
}

/// Smallest constant `c > 0` for which the discrete operator `Δ + c` with
/// Dirichlet data on the outer circle, an unknown constant on the inner
/// circle and zero circulation has a radial kernel. The grid operator is
/// reduced to rotation-invariant functions exactly, the circulation row is
/// used to eliminate the inner value, and the reduced matrix is solved by a
/// dense eigen-decomposition.
pub fn radial_degenerate_shift(g: &AnnulusGrid) -> f64 {
    let (nr, h) = (g.nr, g.hr);
    // Unknowns φ_1 … φ_{nr−2}; φ_{nr−1} = 0 and φ_0 = −Σ_{j≥1} d_j φ_j / d_0.
    let m = nr - 2;
    let d = ONE_SIDED_D1;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for j in 1..nr - 1 {
        let r = g.r(j);
        let cp = (r + 0.5 * h) / (r * h * h);
        let cm = (r - 0.5 * h) / (r * h * h);
        let row = j - 1;
        a[(row, row)] -= cp + cm;
        if j + 1 < nr - 1 {
            a[(row, row + 1)] += cp;
        }
        if j >= 2 {
            a[(row, row - 1)] += cm;
        } else {
            for (jj, dj) in d.iter().enumerate().skip(1) {
                if jj < nr - 1 {
                    a[(row, jj - 1)] -= cm * dj / d[0];
                }
            }
        }
    }
    let eig = a.complex_eigenvalues();
    let top = eig
        .iter()
        .filter(|z| z.im.abs() < 1e-9 * z.re.abs().max(1.0))
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    -top
}
