//! Polar discretization of the annulus `R_i <= r <= R_o`, scalar fields on it,
//! differential operators, boundary functionals and discrete Hölder norms.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;

/// Uniform polar grid. Radial nodes include both boundary circles; angular
/// nodes are periodic, `theta_k = 2 pi k / ns`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusGrid {
    pub r_inner: f64,
    pub r_outer: f64,
    pub nr: usize,
    pub ns: usize,
    pub hr: f64,
    pub dtheta: f64,
    pub area: f64,
    radii: Vec<f64>,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    /// Radial quadrature weights for `int g(r) r dr`.
    radial_weights: Vec<f64>,
}

/// Which boundary circle a functional refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Inner,
    Outer,
}

/// Constant boundary traces of a stream function with its circulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub gamma: f64,
    pub inner_value: f64,
    pub outer_value: f64,
}

impl BoundaryData {
    pub fn new(gamma: f64, inner_value: f64) -> Self {
        Self { gamma, inner_value, outer_value: 0.0 }
    }
}

/// Builds the annulus grid after validating its geometry.
pub fn make_annulus(r_inner: f64, r_outer: f64, nr: usize, ns: usize) -> Result<Arc<AnnulusGrid>> {
    if !(r_inner > 0.0 && r_outer > r_inner && r_inner.is_finite() && r_outer.is_finite()) {
        return Err(Error::InvalidGeometry(format!("need 0 < R_i < R_o, got R_i={r_inner}, R_o={r_outer}")));
    }
    if nr < 8 || ns < 8 || !ns.is_multiple_of(2) {
        return Err(Error::InvalidGeometry(format!("need Nr >= 8 and even Ns >= 8, got Nr={nr}, Ns={ns}")));
    }
    let hr = (r_outer - r_inner) / (nr - 1) as f64;
    let dtheta = TAU / ns as f64;
    let radii: Vec<f64> = (0..nr).map(|j| r_inner + j as f64 * hr).collect();
    let cos_t = (0..ns).map(|k| (k as f64 * dtheta).cos()).collect();
    let sin_t = (0..ns).map(|k| (k as f64 * dtheta).sin()).collect();
    let line = endpoint_corrected_weights(nr);
    let radial_weights = (0..nr).map(|j| line[j] * hr * radii[j]).collect();
    Ok(Arc::new(AnnulusGrid {
        r_inner,
        r_outer,
        nr,
        ns,
        hr,
        dtheta,
        area: std::f64::consts::PI * (r_outer * r_outer - r_inner * r_inner),
        radii,
        cos_t,
        sin_t,
        radial_weights,
    }))
}

/// Unit-spacing line quadrature weights on `n` nodes: trapezoid in the
/// interior with three corrected weights at each end, chosen so the rule is
/// exact for polynomials up to degree five.
fn endpoint_corrected_weights(n: usize) -> Vec<f64> {
    let big_n = (n - 1) as f64;
    let x = |j: usize| j as f64 - big_n / 2.0;
    let m = 3;
    if n < 2 * m {
        // Too short for corrections without overlap: plain Simpson-free trapezoid.
        let mut w = vec![1.0; n];
        w[0] = 0.5;
        w[n - 1] = 0.5;
        return w;
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in [0, 2, 4] {
        a.push((0..m).map(|j| x(j).powi(p) + x(n - 1 - j).powi(p)).collect::<Vec<_>>());
        let exact = 2.0 * (big_n / 2.0).powi(p + 1) / (p + 1) as f64;
        let interior: f64 = (m..n - m).map(|j| x(j).powi(p)).sum();
        b.push(exact - interior);
    }
    let c = fd::solve_dense_small(a, b);
    let mut w = vec![1.0; n];
    for j in 0..m {
        w[j] = c[j];
        w[n - 1 - j] = c[j];
    }
    w
}

impl AnnulusGrid {
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    #[inline]
    pub fn r(&self, j: usize) -> f64 {
        self.radii[j]
    }
    #[inline]
    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta
    }
    #[inline]
    pub fn cos_theta(&self, k: usize) -> f64 {
        self.cos_t[k]
    }
    #[inline]
    pub fn sin_theta(&self, k: usize) -> f64 {
        self.sin_t[k]
    }
    #[inline]
    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * self.ns + k
    }
    pub fn len(&self) -> usize {
        self.nr * self.ns
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Area weight of node `(j, k)`; the weights sum to the annulus area.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        self.radial_weights[j] * self.dtheta
    }
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }
    /// Characteristic spacing used in error budgets.
    pub fn h(&self) -> f64 {
        self.hr
    }
    pub fn same_as(&self, other: &AnnulusGrid) -> bool {
        self.nr == other.nr
            && self.ns == other.ns
            && self.r_inner == other.r_inner
            && self.r_outer == other.r_outer
    }
}

/// Real scalar field on an annulus grid, stored row-major (`j * ns + k`).
#[derive(Debug, Clone)]
pub struct Field2D {
    pub grid: Arc<AnnulusGrid>,
    pub values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: &Arc<AnnulusGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<AnnulusGrid>, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: &Arc<AnnulusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGeometry(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("field contains non-finite values".into()));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Samples `f(r, theta)` at every node.
    pub fn from_fn(grid: &Arc<AnnulusGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.nr {
            let r = grid.r(j);
            for k in 0..grid.ns {
                values.push(f(r, grid.theta(k)));
            }
        }
        Self { grid: grid.clone(), values }
    }

    /// Samples `f(x, y)` in Cartesian coordinates.
    pub fn from_cartesian(grid: &Arc<AnnulusGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |r, t| f(r * t.cos(), r * t.sin()))
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.grid.ns + k]
    }

    pub fn ring(&self, j: usize) -> &[f64] {
        let ns = self.grid.ns;
        &self.values[j * ns..(j + 1) * ns]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field2D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Field2D) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field2D) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field2D) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Field2D) -> Self {
        self.zip_map(other, |x, y| x + a * y)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm over the interior rows only.
    pub fn interior_sup(&self) -> f64 {
        let ns = self.grid.ns;
        self.values[ns..self.values.len() - ns].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn ring_mean(&self, j: usize) -> f64 {
        self.ring(j).iter().sum::<f64>() / self.grid.ns as f64
    }

    /// Largest deviation from the mean on a boundary ring.
    pub fn ring_spread(&self, j: usize) -> f64 {
        let m = self.ring_mean(j);
        self.ring(j).iter().fold(0.0, |a, v| a.max((v - m).abs()))
    }
}

/// Radial derivative field (fourth order, one-sided at the boundary rows).
pub fn d_r(f: &Field2D) -> Field2D {
    let g = &f.grid;
    let (nr, ns) = (g.nr, g.ns);
    let mut out = vec![0.0; g.len()];
    let mut col = vec![0.0; nr];
    let mut d = vec![0.0; nr];
    for k in 0..ns {
        for j in 0..nr {
            col[j] = f.values[j * ns + k];
        }
        fd::deriv4_into(&col, g.hr, &mut d);
        for j in 0..nr {
            out[j * ns + k] = d[j];
        }
    }
    Field2D { grid: g.clone(), values: out }
}

/// Angular derivative field (periodic fourth order).
pub fn d_theta(f: &Field2D) -> Field2D {
    let g = &f.grid;
    let ns = g.ns;
    let mut out = Vec::with_capacity(g.len());
    for j in 0..g.nr {
        out.extend(fd::deriv4_periodic(f.ring(j), g.dtheta));
    }
    debug_assert_eq!(out.len(), ns * g.nr);
    Field2D { grid: g.clone(), values: out }
}

/// Polar gradient components `(d_r f, (1/r) d_theta f)`.
pub fn gradient(f: &Field2D) -> (Field2D, Field2D) {
    let fr = d_r(f);
    let mut ft = d_theta(f);
    let g = &f.grid;
    for j in 0..g.nr {
        let inv = 1.0 / g.r(j);
        for v in &mut ft.values[j * g.ns..(j + 1) * g.ns] {
            *v *= inv;
        }
    }
    (fr, ft)
}

/// Gradient magnitude field.
pub fn grad_norm(f: &Field2D) -> Field2D {
    let (a, b) = gradient(f);
    a.zip_map(&b, |x, y| x.hypot(y))
}

/// Divergence of a vector field given by polar components `(v_r, v_theta)`.
pub fn divergence(vr: &Field2D, vt: &Field2D) -> Field2D {
    let g = &vr.grid;
    let rvr = Field2D::from_fn(g, |r, _| r).mul(vr);
    let a = d_r(&rvr);
    let b = d_theta(vt);
    let mut out = a.add(&b);
    for j in 0..g.nr {
        let inv = 1.0 / g.r(j);
        for v in &mut out.values[j * g.ns..(j + 1) * g.ns] {
            *v *= inv;
        }
    }
    out
}

/// Five-point polar Laplacian in conservative form. Boundary rows use
/// one-sided second-order radial stencils.
pub fn laplacian(f: &Field2D) -> Field2D {
    let g = &f.grid;
    let (nr, ns, h) = (g.nr, g.ns, g.hr);
    let dt2 = g.dtheta * g.dtheta;
    let mut out = vec![0.0; g.len()];
    for j in 0..nr {
        let r = g.r(j);
        for k in 0..ns {
            let kp = (k + 1) % ns;
            let km = (k + ns - 1) % ns;
            let c = f.at(j, k);
            let ang = (f.at(j, kp) - 2.0 * c + f.at(j, km)) / (r * r * dt2);
            let rad = if j == 0 || j == nr - 1 {
                let (s, j0) = if j == 0 { (1.0, 0isize) } else { (-1.0, (nr - 1) as isize) };
                let at = |o: isize| f.at((j0 + s as isize * o) as usize, k);
                let frr = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
                let fr = s * (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
                frr + fr / r
            } else {
                let rp = r + 0.5 * h;
                let rm = r - 0.5 * h;
                (rp * (f.at(j + 1, k) - c) - rm * (c - f.at(j - 1, k))) / (r * h * h)
            };
            out[j * ns + k] = rad + ang;
        }
    }
    Field2D { grid: g.clone(), values: out }
}

/// Poisson bracket `{f, g} = d_r f (1/r) d_theta g - (1/r) d_theta f d_r g`.
pub fn poisson_bracket(f: &Field2D, g: &Field2D) -> Field2D {
    let (fr, ft) = gradient(f);
    let (gr, gt) = gradient(g);
    let values = (0..fr.values.len())
        .map(|i| fr.values[i] * gt.values[i] - ft.values[i] * gr.values[i])
        .collect();
    Field2D { grid: f.grid.clone(), values }
}

/// Seven-point one-sided stencil for the first derivative at an endpoint
/// (sixth order), in units of `1 / (60 h)`.
pub const ONE_SIDED_D1: [f64; 7] = [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0];

/// Outward normal derivative of `psi` at boundary node `k` (sixth-order one-sided).
pub fn normal_derivative(psi: &Field2D, which: Boundary, k: usize) -> f64 {
    let g = &psi.grid;
    let s = 1.0 / (60.0 * g.hr);
    match which {
        Boundary::Inner => -s * (0..7).map(|j| ONE_SIDED_D1[j] * psi.at(j, k)).sum::<f64>(),
        Boundary::Outer => {
            let m = g.nr - 1;
            s * (0..7).map(|j| ONE_SIDED_D1[j] * psi.at(m - j, k)).sum::<f64>()
        }
    }
}

/// Line integral of the outward normal derivative over a boundary circle.
pub fn circulation(psi: &Field2D, which: Boundary) -> f64 {
    let g = &psi.grid;
    let radius = match which {
        Boundary::Inner => g.r_inner,
        Boundary::Outer => g.r_outer,
    };
    let s: f64 = (0..g.ns).map(|k| normal_derivative(psi, which, k)).sum();
    s * radius * g.dtheta
}

/// Area integral with the endpoint-corrected polar quadrature.
pub fn integrate(f: &Field2D) -> f64 {
    let g = &f.grid;
    let mut total = 0.0;
    for j in 0..g.nr {
        let ring: f64 = f.ring(j).iter().sum();
        total += g.weight(j) * ring;
    }
    total
}

/// `int f g` over the annulus.
pub fn inner_product(f: &Field2D, g: &Field2D) -> f64 {
    let grid = &f.grid;
    let mut total = 0.0;
    for j in 0..grid.nr {
        let s: f64 = f.ring(j).iter().zip(g.ring(j)).map(|(a, b)| a * b).sum();
        total += grid.weight(j) * s;
    }
    total
}

/// All Cartesian partial derivatives of order `order` (every ordered index
/// sequence, so mixed partials appear more than once).
fn cartesian_derivatives(f: &Field2D, order: usize) -> Vec<Field2D> {
    let mut level = vec![f.clone()];
    for _ in 0..order {
        let mut next = Vec::with_capacity(level.len() * 2);
        for h in &level {
            let (hr, ht) = gradient(h);
            let g = &h.grid;
            let mut dx = vec![0.0; g.len()];
            let mut dy = vec![0.0; g.len()];
            for j in 0..g.nr {
                for k in 0..g.ns {
                    let i = g.idx(j, k);
                    let (c, s) = (g.cos_theta(k), g.sin_theta(k));
                    dx[i] = c * hr.values[i] - s * ht.values[i];
                    dy[i] = s * hr.values[i] + c * ht.values[i];
                }
            }
            next.push(Field2D { grid: g.clone(), values: dx });
            next.push(Field2D { grid: g.clone(), values: dy });
        }
        level = next;
    }
    level
}

/// Stride between sampled nodes for the 2D Hölder seminorm.
pub const HOLDER_STRIDE_2D: usize = 4;

/// Discrete Hölder norm `max_{j<=n} sup|D^j f| + sum_{j<=n} [D^j f]_alpha`.
pub fn holder_norm_field(f: &Field2D, n: usize, alpha: f64) -> f64 {
    let g = &f.grid;
    let mut sup = 0.0f64;
    let mut semi = 0.0;
    let pts: Vec<(usize, f64, f64)> = (0..g.nr)
        .step_by(HOLDER_STRIDE_2D)
        .flat_map(|j| {
            (0..g.ns).step_by(HOLDER_STRIDE_2D).map(move |k| (j, k))
        })
        .map(|(j, k)| (g.idx(j, k), g.r(j) * g.cos_theta(k), g.r(j) * g.sin_theta(k)))
        .collect();
    for order in 0..=n {
        let comps = cartesian_derivatives(f, order);
        let mut s_order = 0.0f64;
        for c in &comps {
            sup = sup.max(c.sup_norm());
            let mut s = 0.0f64;
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    let (ia, xa, ya) = pts[a];
                    let (ib, xb, yb) = pts[b];
                    let d = (xa - xb).hypot(ya - yb);
                    let q = (c.values[ia] - c.values[ib]).abs() / d.powf(alpha);
                    s = s.max(q);
                }
            }
            s_order = s_order.max(s);
        }
        semi += s_order;
    }
    sup + semi
}
