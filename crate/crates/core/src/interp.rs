//! C² bicubic interpolation of grid fields: tensor-product cubic spline,
//! periodic in theta and clamped in r, stored in Hermite form.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::fd;
use crate::grid::{AnnulusGrid, Field2D};

/// Hermite data (value, d_r, d_theta, d_r d_theta) at every node.
#[derive(Debug, Clone)]
pub struct FieldInterp {
    pub grid: Arc<AnnulusGrid>,
    f: Vec<f64>,
    fr: Vec<f64>,
    ft: Vec<f64>,
    frt: Vec<f64>,
}

/// Precomputed location and Hermite weights of one evaluation point, so many
/// fields can be sampled at the same points cheaply.
#[derive(Debug, Clone, Copy)]
pub struct PointStencil {
    nodes: [usize; 4],
    w: [[f64; 4]; 4],
}

fn angular_slopes(values: &[f64], g: &AnnulusGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for j in 0..g.nr {
        out.extend(fd::periodic_spline_slopes(&values[j * g.ns..(j + 1) * g.ns], g.dtheta));
    }
    out
}

fn radial_slopes(values: &[f64], g: &AnnulusGrid) -> Vec<f64> {
    let (nr, ns) = (g.nr, g.ns);
    let mut out = vec![0.0; values.len()];
    let mut col = vec![0.0; nr];
    let mut m = vec![0.0; nr];
    let mut work = vec![0.0; nr];
    for k in 0..ns {
        for j in 0..nr {
            col[j] = values[j * ns + k];
        }
        fd::spline_slopes_into(&col, g.hr, &mut m, &mut work);
        for j in 0..nr {
            out[j * ns + k] = m[j];
        }
    }
    out
}

#[inline]
fn locate(g: &AnnulusGrid, r: f64, theta: f64) -> (usize, f64, usize, f64) {
    let p = (r - g.r_inner) / g.hr;
    let j = (p.floor().max(0.0) as usize).min(g.nr - 2);
    let u = p - j as f64;
    let t = theta.rem_euclid(TAU) / g.dtheta;
    let k = (t.floor() as usize).min(g.ns - 1);
    let v = t - k as f64;
    (j, u, k, v)
}

impl FieldInterp {
    pub fn new(field: &Field2D) -> Self {
        let g = &field.grid;
        let fr = radial_slopes(&field.values, g);
        let ft = angular_slopes(&field.values, g);
        let frt = angular_slopes(&fr, g);
        Self { grid: g.clone(), f: field.values.clone(), fr, ft, frt }
    }

    /// Value and polar partials `(f, d_r f, d_theta f)` at `(r, theta)`.
    pub fn eval_grad(&self, r: f64, theta: f64) -> (f64, f64, f64) {
        let g = &*self.grid;
        let (j, u, k, v) = locate(g, r, theta);
        let k1 = (k + 1) % g.ns;
        let (hr, ht) = (g.hr, g.dtheta);
        let bu = fd::hermite_basis(u);
        let du = fd::hermite_basis_d1(u);
        let bv = fd::hermite_basis(v);
        let dv = fd::hermite_basis_d1(v);
        let idx = [g.idx(j, k), g.idx(j + 1, k), g.idx(j, k1), g.idx(j + 1, k1)];
        // corner c = (a, b) with a radial, b angular
        let ab = [(0usize, 0usize), (1, 0), (0, 1), (1, 1)];
        let (mut val, mut dr, mut dt) = (0.0, 0.0, 0.0);
        for (c, &(a, b)) in ab.iter().enumerate() {
            let i = idx[c];
            let (ha, ga) = (bu[2 * a], bu[2 * a + 1]);
            let (hb, gb) = (bv[2 * b], bv[2 * b + 1]);
            let (dha, dga) = (du[2 * a], du[2 * a + 1]);
            let (dhb, dgb) = (dv[2 * b], dv[2 * b + 1]);
            let (f, fr, ft, frt) = (self.f[i], hr * self.fr[i], ht * self.ft[i], hr * ht * self.frt[i]);
            val += ha * hb * f + ga * hb * fr + ha * gb * ft + ga * gb * frt;
            dr += dha * hb * f + dga * hb * fr + dha * gb * ft + dga * gb * frt;
            dt += ha * dhb * f + ga * dhb * fr + ha * dgb * ft + ga * dgb * frt;
        }
        (val, dr / hr, dt / ht)
    }

    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        self.eval_grad(r, theta).0
    }

    /// Precomputes the stencil of one point for repeated sampling.
    pub fn stencil(grid: &AnnulusGrid, r: f64, theta: f64) -> PointStencil {
        let (j, u, k, v) = locate(grid, r, theta);
        let k1 = (k + 1) % grid.ns;
        let bu = fd::hermite_basis(u);
        let bv = fd::hermite_basis(v);
        let (hr, ht) = (grid.hr, grid.dtheta);
        let nodes = [grid.idx(j, k), grid.idx(j + 1, k), grid.idx(j, k1), grid.idx(j + 1, k1)];
        let ab = [(0usize, 0usize), (1, 0), (0, 1), (1, 1)];
        let mut w = [[0.0; 4]; 4];
        for (c, &(a, b)) in ab.iter().enumerate() {
            let (ha, ga) = (bu[2 * a], bu[2 * a + 1]);
            let (hb, gb) = (bv[2 * b], bv[2 * b + 1]);
            w[c] = [ha * hb, ga * hb * hr, ha * gb * ht, ga * gb * hr * ht];
        }
        PointStencil { nodes, w }
    }

    pub fn sample(&self, s: &PointStencil) -> f64 {
        let mut v = 0.0;
        for c in 0..4 {
            let i = s.nodes[c];
            let w = &s.w[c];
            v += w[0] * self.f[i] + w[1] * self.fr[i] + w[2] * self.ft[i] + w[3] * self.frt[i];
        }
        v
    }
}
