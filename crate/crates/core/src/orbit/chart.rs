//! Level charts: coordinates `z(t, s)` on the annulus whose `t`-lines follow
//! the gradient of `ω` and whose `s`-lines are its level sets, built by
//! integrating
//!
//! ```text
//! ż = (max ω − min ω) ∇ω / |∇ω|²,    z(0, s) on the inner circle,
//! ```
//!
//! so that `ω(z(t, s)) = min ω + t (max ω − min ω)`.

use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::curve::Curve1D;
use crate::error::{Error, Result};
use crate::grid::{AnnulusGrid, Field2D};
use crate::interp::{FieldInterp, PointStencil};

/// Default level-residual tolerance of a chart.
pub const CHART_TOL: f64 = 1e-7;
/// Critical-point floor relative to the mean gradient scale.
pub const GRAD_FLOOR_REL: f64 = 1e-6;
/// Relative tolerance for boundary constancy of the charted field.
pub const BOUNDARY_TOL_REL: f64 = 1e-6;

const STEP_TOL: f64 = 1e-11;
const MAX_SUBSTEPS: usize = 1 << 12;

#[derive(Debug, Clone)]
pub struct LevelChart {
    pub grid: Arc<AnnulusGrid>,
    pub nt: usize,
    pub ns: usize,
    /// `(r, theta)` of node `(m, k)` at index `m * ns + k`.
    pub z: Vec<(f64, f64)>,
    pub grad_norm: Vec<f64>,
    /// `|∂z/∂s|` with `s ∈ [0, 1)`.
    pub arc_weight: Vec<f64>,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Largest `|ω(z) − level|` over the nodes.
    pub level_residual: f64,
    stencils: Vec<PointStencil>,
}

struct Tracer<'a> {
    it: &'a FieldInterp,
    k: f64,
    floor: f64,
    r_lo: f64,
    r_hi: f64,
}

impl Tracer<'_> {
    #[inline]
    fn rhs(&self, r: f64, th: f64) -> Result<(f64, f64)> {
        if !(r >= self.r_lo && r <= self.r_hi) {
            return Err(Error::NotInFplus(format!("gradient line left the annulus (r = {r:.6})")));
        }
        let (_, fr, ft) = self.it.eval_grad(r, th);
        let ftr = ft / r;
        let g2 = fr * fr + ftr * ftr;
        if !(g2.sqrt() > self.floor) {
            return Err(Error::CriticalPointDetected { grad: g2.sqrt(), r, theta: th });
        }
        Ok((self.k * fr / g2, self.k * ftr / (r * g2)))
    }

    fn rk4(&self, mut r: f64, mut th: f64, dt: f64, n: usize) -> Result<(f64, f64)> {
        let h = dt / n as f64;
        for _ in 0..n {
            let (a1, b1) = self.rhs(r, th)?;
            let (a2, b2) = self.rhs(r + 0.5 * h * a1, th + 0.5 * h * b1)?;
            let (a3, b3) = self.rhs(r + 0.5 * h * a2, th + 0.5 * h * b2)?;
            let (a4, b4) = self.rhs(r + h * a3, th + h * b3)?;
            r += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            th += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        Ok((r, th))
    }

    /// Step-doubling RK4 over one output interval.
    fn advance(&self, r: f64, th: f64, dt: f64) -> Result<(f64, f64)> {
        let mut n = 2;
        let mut coarse = self.rk4(r, th, dt, n)?;
        loop {
            let fine = self.rk4(r, th, dt, 2 * n)?;
            let err = (fine.0 - coarse.0).abs().max(r * (fine.1 - coarse.1).abs());
            if err < STEP_TOL || 2 * n >= MAX_SUBSTEPS {
                return Ok(fine);
            }
            n *= 2;
            coarse = fine;
        }
    }

    /// Newton projection onto the exact level `target` along the gradient.
    fn project(&self, mut r: f64, mut th: f64, target: f64) -> (f64, f64, f64) {
        for _ in 0..4 {
            let (v, fr, ft) = self.it.eval_grad(r, th);
            let ftr = ft / r;
            let g2 = fr * fr + ftr * ftr;
            let d = (target - v) / g2;
            r += d * fr;
            th += d * ftr / r;
            if (target - v).abs() < 1e-15 * (1.0 + target.abs()) {
                break;
            }
        }
        let (v, _, _) = self.it.eval_grad(r, th);
        (r, th, (v - target).abs())
    }
}

/// Checks the admissibility of `omega` for charting and returns `(min, max)`
/// as the boundary values.
pub fn boundary_levels(omega: &Field2D) -> Result<(f64, f64)> {
    let g = &omega.grid;
    let lo = omega.ring_mean(0);
    let hi = omega.ring_mean(g.nr - 1);
    let span = hi - lo;
    let mag = lo.abs().max(hi.abs()).max(1.0);
    if span.abs() <= 1e-12 * mag {
        return Err(Error::CriticalPointDetected { grad: 0.0, r: g.r_inner, theta: 0.0 });
    }
    if span < 0.0 {
        return Err(Error::NotInFplus(format!("inner value {lo:.6} is not below outer value {hi:.6}")));
    }
    let tol = BOUNDARY_TOL_REL * span;
    let spread = omega.ring_spread(0).max(omega.ring_spread(g.nr - 1));
    if spread > tol {
        return Err(Error::NotInFplus(format!("field is not constant on the boundary (spread {spread:.3e})")));
    }
    Ok((lo, hi))
}

/// Chart of the level sets of `omega` with `nt` levels (uniform in `t`) and
/// one gradient line per angular grid node.
pub fn level_chart(omega: &Field2D, nt: usize) -> Result<LevelChart> {
    let g = omega.grid.clone();
    let (omin, omax) = boundary_levels(omega)?;
    let it = FieldInterp::new(omega);
    let span = omax - omin;
    let tracer = Tracer {
        it: &it,
        k: span,
        floor: GRAD_FLOOR_REL * span / (g.r_outer - g.r_inner),
        r_lo: g.r_inner - g.hr,
        r_hi: g.r_outer + g.hr,
    };
    let ns = g.ns;
    let dt = 1.0 / (nt - 1) as f64;
    let lines: Vec<Result<Vec<(f64, f64, f64)>>> = (0..ns)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::with_capacity(nt);
            let (mut r, mut th) = (g.r_inner, g.theta(k));
            out.push((r, th, (it.eval(r, th) - omin).abs()));
            for m in 1..nt {
                let (r1, th1) = tracer.advance(r, th, dt)?;
                let target = if m == nt - 1 { omax } else { omin + m as f64 * dt * span };
                let (mut r2, th2, res) = tracer.project(r1, th1, target);
                if m == nt - 1 && (r2 - g.r_outer).abs() < 1e-9 {
                    r2 = g.r_outer;
                }
                out.push((r2, th2, res));
                r = r2;
                th = th2;
            }
            Ok(out)
        })
        .collect();
    let mut z = vec![(0.0, 0.0); nt * ns];
    let mut level_residual = 0.0f64;
    for (k, line) in lines.into_iter().enumerate() {
        for (m, (r, th, res)) in line?.into_iter().enumerate() {
            z[m * ns + k] = (r, th);
            level_residual = level_residual.max(res);
        }
    }
    let grad_norm: Vec<f64> = z
        .iter()
        .map(|&(r, th)| {
            let (_, fr, ft) = it.eval_grad(r, th);
            fr.hypot(ft / r)
        })
        .collect();
    let arc_weight = arc_speed(&z, nt, ns);
    let stencils = z.iter().map(|&(r, th)| FieldInterp::stencil(&g, r, th)).collect();
    Ok(LevelChart { grid: g, nt, ns, z, grad_norm, arc_weight, omega_min: omin, omega_max: omax, level_residual, stencils })
}

/// Spectral derivative in the periodic index of a row of samples, for `s ∈ [0, 1)`.
pub(crate) fn spectral_derivative(planner: &mut FftPlanner<f64>, row: &[f64]) -> Vec<f64> {
    let n = row.len();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (m, c) in buf.iter_mut().enumerate() {
        let freq = if m < n / 2 {
            m as f64
        } else if m == n / 2 {
            0.0
        } else {
            m as f64 - n as f64
        };
        *c *= Complex::new(0.0, TAU * freq / n as f64);
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Periodic antiderivative with zero `s`-mean of a zero-mean row, for `s ∈ [0, 1)`.
pub(crate) fn spectral_antiderivative(planner: &mut FftPlanner<f64>, row: &[f64]) -> Vec<f64> {
    let n = row.len();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (m, c) in buf.iter_mut().enumerate() {
        let freq = if m < n / 2 {
            m as f64
        } else if m == n / 2 {
            0.0
        } else {
            m as f64 - n as f64
        };
        *c = if freq == 0.0 { Complex::new(0.0, 0.0) } else { *c / Complex::new(0.0, TAU * freq) / n as f64 };
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

fn arc_speed(z: &[(f64, f64)], nt: usize, ns: usize) -> Vec<f64> {
    let mut planner = FftPlanner::new();
    let mut out = vec![0.0; nt * ns];
    for m in 0..nt {
        let row = &z[m * ns..(m + 1) * ns];
        let x: Vec<f64> = row.iter().map(|&(r, t)| r * t.cos()).collect();
        let y: Vec<f64> = row.iter().map(|&(r, t)| r * t.sin()).collect();
        let dx = spectral_derivative(&mut planner, &x);
        let dy = spectral_derivative(&mut planner, &y);
        for k in 0..ns {
            out[m * ns + k] = dx[k].hypot(dy[k]);
        }
    }
    out
}

impl LevelChart {
    pub fn level(&self, m: usize) -> f64 {
        if m == self.nt - 1 {
            self.omega_max
        } else {
            self.omega_min + m as f64 / (self.nt - 1) as f64 * (self.omega_max - self.omega_min)
        }
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.nt).map(|m| self.level(m)).collect()
    }

    /// Samples `u` at every chart node.
    pub fn sample(&self, u: &Field2D) -> Vec<f64> {
        let it = FieldInterp::new(u);
        self.sample_interp(&it)
    }

    pub fn sample_interp(&self, it: &FieldInterp) -> Vec<f64> {
        self.stencils.iter().map(|s| it.sample(s)).collect()
    }

    /// `J(λ_m) = Σ_k v(m, k) |∂z/∂s| Δs` for node values `v`.
    pub fn j_of_nodes(&self, v: &[f64]) -> Curve1D {
        let ns = self.ns;
        let vals = (0..self.nt)
            .map(|m| {
                let row = m * ns..(m + 1) * ns;
                v[row.clone()].iter().zip(&self.arc_weight[row]).map(|(a, b)| a * b).sum::<f64>() / ns as f64
            })
            .collect();
        Curve1D::new(self.omega_min, self.omega_max, vals)
    }

    /// Node values of `1 / |∇ω|`.
    pub fn inv_grad(&self) -> Vec<f64> {
        self.grad_norm.iter().map(|g| 1.0 / g).collect()
    }
}

/// Line integrals `λ ↦ ∮_{ω=λ} u dl` over the chart levels.
pub fn j_functional(chart: &LevelChart, u: &Field2D) -> Curve1D {
    chart.j_of_nodes(&chart.sample(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_annulus;
    use std::f64::consts::PI;

    #[test]
    fn radial_chart_is_exact() {
        let g = make_annulus(1.0, 2.0, 32, 64).unwrap();
        let w = Field2D::from_fn(&g, |r, _| r * r);
        let c = level_chart(&w, 32).unwrap();
        assert!(c.level_residual < 1e-8);
        for m in 0..c.nt {
            let t = m as f64 / 31.0;
            for k in 0..c.ns {
                let (r, th) = c.z[m * c.ns + k];
                assert!((r - (1.0 + 3.0 * t).sqrt()).abs() < 1e-8);
                assert!((th - g.theta(k)).abs() < 1e-10);
            }
        }
        let j = j_functional(&c, &Field2D::constant(&g, 1.0));
        assert!((j.values[c.nt - 1] - 4.0 * PI).abs() < 1e-6);
        let jinv = c.j_of_nodes(&c.inv_grad());
        assert!(jinv.values.iter().all(|v| (v - PI).abs() < 1e-6));
    }

    #[test]
    fn nonradial_chart_and_errors() {
        let g = make_annulus(1.0, 2.0, 32, 64).unwrap();
        let w = Field2D::from_fn(&g, |r, t| r * r + 0.05 * (r - 1.0) * (2.0 - r) * t.sin());
        let c = level_chart(&w, 32).unwrap();
        assert!(c.level_residual < CHART_TOL);
        assert!(c.grad_norm.iter().all(|&v| v > 0.0));
        let e = level_chart(&Field2D::constant(&g, 1.0), 32).unwrap_err();
        assert_eq!(e.code(), "critical-point-detected");
        let e = level_chart(&Field2D::from_fn(&g, |r, _| -r * r), 32).unwrap_err();
        assert_eq!(e.code(), "not-in-Fplus");
    }

    #[test]
    fn spectral_calculus_roundtrip() {
        let n = 32;
        let row: Vec<f64> = (0..n).map(|k| (TAU * 3.0 * k as f64 / n as f64).cos()).collect();
        let mut p = FftPlanner::new();
        let d = spectral_derivative(&mut p, &row);
        let a = spectral_antiderivative(&mut p, &d);
        for k in 0..n {
            let s = k as f64 / n as f64;
            assert!((d[k] + TAU * 3.0 * (TAU * 3.0 * s).sin()).abs() < 1e-10);
            assert!((a[k] - row[k]).abs() < 1e-12);
        }
    }
}
