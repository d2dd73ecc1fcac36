//! Linear elliptic solves `Δφ + cφ = k` on the annulus with the mixed
//! conditions used throughout: `φ = 0` on the outer circle, `φ` equal to an
//! unknown constant on the inner circle, and prescribed circulation there.
//!
//! The discrete system is bordered by one unknown (the inner trace) and one
//! equation (the circulation functional):
//!
//! ```text
//! [ A   u ] [ φ ]   [ b ]        A : Dirichlet-row stencil of Δ + c
//! [ lᵀ  0 ] [ C ] = [ γ ]        u : -1 on inner-boundary rows, l : circulation
//! ```
//!
//! and is reduced to two banded solves with `A` (Schur complement in `C`).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::banded::{BandMatrix, BandedLu};
use crate::error::{Error, Result};
use crate::grid::{AnnulusGrid, Field2D, ONE_SIDED_D1};

/// Default relative threshold separating degenerate from nondegenerate operators.
pub const ND1_THRESHOLD: f64 = 1e-6;
/// Relative singular-value floor below which `solve_ve` refuses to solve.
pub const SOLVE_SIGMA_FLOOR: f64 = 1e-10;

/// Factored bordered operator for one coefficient field `c`.
#[derive(Debug)]
pub struct EllipticOperator {
    pub grid: Arc<AnnulusGrid>,
    matrix: BandMatrix,
    lu: BandedLu,
    /// Sparse circulation functional: (index, weight).
    ell: Vec<(usize, f64)>,
    /// `A^{-1} u`
    w: Vec<f64>,
    /// `l^T A^{-1} u`
    schur: f64,
    /// `A^{-T} l`
    wt: Vec<f64>,
}

/// Outcome of a non-degeneracy check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NdReport {
    pub sigma_min: f64,
    pub op_norm: f64,
    pub relative: f64,
    pub threshold: f64,
    pub nondegenerate: bool,
}

impl NdReport {
    pub fn new(sigma_min: f64, op_norm: f64, threshold: f64) -> Self {
        let relative = sigma_min / op_norm;
        Self { sigma_min, op_norm, relative, threshold, nondegenerate: relative > threshold }
    }
}

fn inner_indices(g: &AnnulusGrid) -> impl Iterator<Item = usize> + '_ {
    (0..g.ns).map(move |k| g.idx(0, k))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl EllipticOperator {
    /// Assembles and factors the operator `Δ + c`. Only interior values of `c` matter.
    pub fn new(c: &Field2D) -> Result<Self> {
        let op = Self::new_unchecked(c);
        let amax = op.matrix.max_abs();
        let pivot_ratio = op.lu.min_pivot / op.lu.max_pivot.max(amax);
        if !op.schur.is_finite() || op.schur == 0.0 {
            return Err(Error::SingularSystem("circulation of the harmonic blend vanishes".into()));
        }
        if !(pivot_ratio > 1e-8) || op.schur.abs() < 1e-8 * amax {
            let rep = op.sigma_report(SOLVE_SIGMA_FLOOR);
            if !rep.nondegenerate {
                return Err(Error::NearSingularOperator { sigma_min: rep.sigma_min });
            }
        }
        Ok(op)
    }

    /// Assembly and factorization without the degeneracy guard, for callers
    /// that only want the singular-value report.
    pub fn new_unchecked(c: &Field2D) -> Self {
        let g = c.grid.clone();
        let (nr, ns, h) = (g.nr, g.ns, g.hr);
        let n = g.len();
        let mut a = BandMatrix::zeros(n, ns);
        let dt2 = g.dtheta * g.dtheta;
        for k in 0..ns {
            a.add(g.idx(0, k), g.idx(0, k), 1.0);
            a.add(g.idx(nr - 1, k), g.idx(nr - 1, k), 1.0);
        }
        for j in 1..nr - 1 {
            let r = g.r(j);
            let cp = (r + 0.5 * h) / (r * h * h);
            let cm = (r - 0.5 * h) / (r * h * h);
            let ca = 1.0 / (r * r * dt2);
            for k in 0..ns {
                let i = g.idx(j, k);
                a.add(i, i, -(cp + cm) - 2.0 * ca + c.values[i]);
                a.add(i, g.idx(j + 1, k), cp);
                a.add(i, g.idx(j - 1, k), cm);
                a.add(i, g.idx(j, (k + 1) % ns), ca);
                a.add(i, g.idx(j, (k + ns - 1) % ns), ca);
            }
        }
        // Circulation over the inner circle with outward normal -e_r, using the
        // same one-sided radial derivative as `grid::circulation`.
        let coef = ONE_SIDED_D1;
        let scale = -g.r_inner * g.dtheta / (60.0 * h);
        let mut ell = Vec::with_capacity(7 * ns);
        for k in 0..ns {
            for (j, cj) in coef.iter().enumerate() {
                ell.push((g.idx(j, k), scale * cj));
            }
        }
        let lu = a.clone().factor();
        let mut u = vec![0.0; n];
        for i in inner_indices(&g) {
            u[i] = -1.0;
        }
        let w = lu.solve(&u);
        let schur: f64 = ell.iter().map(|&(i, v)| v * w[i]).sum();
        let mut lvec = vec![0.0; n];
        for &(i, v) in &ell {
            lvec[i] += v;
        }
        let wt = lu.solve_t(&lvec);
        Self { grid: g, matrix: a, lu, ell, w, schur, wt }
    }

    fn ell_dot(&self, x: &[f64]) -> f64 {
        self.ell.iter().map(|&(i, v)| v * x[i]).sum()
    }

    fn rhs_from(&self, k: &Field2D) -> Vec<f64> {
        let g = &self.grid;
        let mut b = k.values.clone();
        for kk in 0..g.ns {
            b[g.idx(0, kk)] = 0.0;
            b[g.idx(g.nr - 1, kk)] = 0.0;
        }
        b
    }

    /// Bordered solve with a full right-hand side `(b, gamma)`; returns `(φ, C)`.
    fn solve_bordered(&self, b: &[f64], gamma: f64) -> (Vec<f64>, f64) {
        let v = self.lu.solve(b);
        let c = (self.ell_dot(&v) - gamma) / self.schur;
        let phi = v.iter().zip(&self.w).map(|(vi, wi)| vi - c * wi).collect();
        (phi, c)
    }

    /// Transposed bordered solve `B^T (x, y) = (b, beta)`.
    fn solve_bordered_t(&self, b: &[f64], beta: f64) -> (Vec<f64>, f64) {
        let v = self.lu.solve_t(b);
        let g = &self.grid;
        let utv: f64 = inner_indices(g).map(|i| -v[i]).sum();
        let y = (utv - beta) / self.schur;
        let x = v.iter().zip(&self.wt).map(|(vi, wi)| vi - y * wi).collect();
        (x, y)
    }

    fn apply_bordered(&self, x: &[f64], c: f64) -> (Vec<f64>, f64) {
        let mut y = self.matrix.matvec(x);
        for i in inner_indices(&self.grid) {
            y[i] -= c;
        }
        (y, self.ell_dot(x))
    }

    fn apply_bordered_t(&self, x: &[f64], c: f64) -> (Vec<f64>, f64) {
        let mut y = self.matrix.matvec_t(x);
        for &(i, v) in &self.ell {
            y[i] += v * c;
        }
        let s: f64 = inner_indices(&self.grid).map(|i| -x[i]).sum();
        (y, s)
    }

    /// Solves `Δφ + cφ = k` with `φ|Γ_o = 0`, `φ|Γ_i` constant and circulation `gamma`.
    pub fn solve(&self, k: &Field2D, gamma: f64) -> (Field2D, f64) {
        let b = self.rhs_from(k);
        let (phi, c) = self.solve_bordered(&b, gamma);
        (Field2D { grid: self.grid.clone(), values: phi }, c)
    }

    /// Smallest singular value of the bordered matrix by inverse power
    /// iteration on `BᵀB` (20 iterations, relative tolerance 1e-8), and the
    /// operator 2-norm by direct power iteration.
    pub fn sigma_report(&self, threshold: f64) -> NdReport {
        let n = self.grid.len();
        let start = |seed: f64| -> (Vec<f64>, f64) {
            let x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + seed) * 0.618_033_988_75).fract()).collect();
            let c = 1.0;
            let s = (dot(&x, &x) + c * c).sqrt();
            (x.iter().map(|v| v / s).collect(), c / s)
        };
        let (mut x, mut c) = start(0.0);
        let mut est = f64::INFINITY;
        for _ in 0..20 {
            let (y, yc) = self.solve_bordered_t(&x, c);
            let (z, zc) = self.solve_bordered(&y, yc);
            let nz = (dot(&z, &z) + zc * zc).sqrt();
            let new = 1.0 / nz.sqrt();
            x = z.iter().map(|v| v / nz).collect();
            c = zc / nz;
            let done = (new - est).abs() <= 1e-8 * new;
            est = new;
            if done || !est.is_finite() {
                break;
            }
        }
        let sigma_min = if est.is_finite() { est } else { 0.0 };
        let (mut x, mut c) = start(0.5);
        let mut op = 0.0;
        for _ in 0..60 {
            let (y, yc) = self.apply_bordered(&x, c);
            let (z, zc) = self.apply_bordered_t(&y, yc);
            let nz = (dot(&z, &z) + zc * zc).sqrt();
            let new = nz.sqrt();
            x = z.iter().map(|v| v / nz).collect();
            c = zc / nz;
            let done = (new - op).abs() <= 1e-6 * new;
            op = new;
            if done {
                break;
            }
        }
        debug_assert!(norm(&x) > 0.0);
        NdReport::new(sigma_min, op, threshold)
    }
}

type GridKey = (u64, u64, usize, usize);

fn laplace_cache() -> &'static Mutex<HashMap<GridKey, Arc<EllipticOperator>>> {
    static CACHE: OnceLock<Mutex<HashMap<GridKey, Arc<EllipticOperator>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Factored Laplacian (`c = 0`) for a grid, shared across calls.
pub fn laplace_operator(grid: &Arc<AnnulusGrid>) -> Result<Arc<EllipticOperator>> {
    let key = (grid.r_inner.to_bits(), grid.r_outer.to_bits(), grid.nr, grid.ns);
    if let Some(op) = laplace_cache().lock().unwrap().get(&key) {
        return Ok(op.clone());
    }
    let op = Arc::new(EllipticOperator::new(&Field2D::zeros(grid))?);
    let mut cache = laplace_cache().lock().unwrap();
    if cache.len() > 16 {
        cache.clear();
    }
    Ok(cache.entry(key).or_insert(op).clone())
}

/// Solves `Δψ = ω` with `ψ|Γ_o = 0`, `ψ|Γ_i` constant and circulation `gamma`
/// on the inner circle. Returns the field and its inner trace.
pub fn solve_poisson(omega: &Field2D, gamma: f64) -> Result<(Field2D, f64)> {
    let op = laplace_operator(&omega.grid)?;
    Ok(op.solve(omega, gamma))
}

/// Solves `Δφ + cφ = k` with zero circulation and the same boundary structure.
pub fn solve_ve(c: &Field2D, k: &Field2D) -> Result<Field2D> {
    if c.values.iter().all(|&v| v == 0.0) {
        return Ok(laplace_operator(&c.grid)?.solve(k, 0.0).0);
    }
    let op = EllipticOperator::new(c)?;
    Ok(op.solve(k, 0.0).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{circulation, laplacian, make_annulus, Boundary};
    use std::f64::consts::{LN_2, PI, TAU};

    #[test]
    fn harmonic_and_quadratic_closed_forms() {
        let g = make_annulus(1.0, 2.0, 64, 128).unwrap();
        let h2 = g.hr * g.hr;
        let (psi, c) = solve_poisson(&Field2D::zeros(&g), -TAU).unwrap();
        let ex = Field2D::from_fn(&g, |r, _| (r / 2.0).ln());
        assert!(psi.sub(&ex).sup_norm() < 10.0 * h2);
        assert!((c + LN_2).abs() < 10.0 * h2);
        let (psi, c) = solve_poisson(&Field2D::constant(&g, 4.0), -4.0 * PI).unwrap();
        let ex = Field2D::from_fn(&g, |r, _| r * r - 4.0);
        assert!(psi.sub(&ex).sup_norm() < 10.0 * h2);
        assert!((c + 3.0).abs() < 10.0 * h2);
        assert!((circulation(&psi, Boundary::Inner) + 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn ve_closed_form_and_residual() {
        let g = make_annulus(1.0, 2.0, 48, 96).unwrap();
        let phi = solve_ve(&Field2D::zeros(&g), &Field2D::constant(&g, 4.0)).unwrap();
        let ex = |r: f64| r * r - 2.0 * r.ln() - 4.0 + 2.0 * LN_2;
        assert!((phi.at(0, 3) - (-3.0 + 2.0 * LN_2)).abs() < 1e-3);
        assert!(phi.sub(&Field2D::from_fn(&g, |r, _| ex(r))).sup_norm() < 10.0 * g.hr * g.hr);
        let c = Field2D::constant(&g, -1.0);
        let k = Field2D::from_fn(&g, |r, t| (3.0 * t).sin() * (r - 1.0) + r.cos());
        let phi = solve_ve(&c, &k).unwrap();
        let res = laplacian(&phi).add(&phi.mul(&c)).sub(&k);
        assert!(res.interior_sup() < 1e-8 * k.sup_norm());
        assert!(circulation(&phi, Boundary::Inner).abs() < 1e-10);
        assert!(phi.ring_spread(0) < 1e-12 && phi.ring(g.nr - 1).iter().all(|v| v.abs() < 1e-14));
        let z = solve_ve(&c, &Field2D::zeros(&g)).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
    }

    #[test]
    fn maximum_principle_spot_check() {
        let g = make_annulus(1.0, 2.0, 24, 48).unwrap();
        let c = Field2D::from_fn(&g, |r, _| -r);
        let k = Field2D::from_fn(&g, |r, t| 1.0 + (t.sin() * r).powi(2));
        let phi = solve_ve(&c, &k).unwrap();
        assert!(phi.values.iter().all(|&v| v <= 1e-14));
    }

    #[test]
    fn sigma_estimates_are_consistent() {
        let g = make_annulus(1.0, 2.0, 12, 16).unwrap();
        let op = EllipticOperator::new(&Field2D::zeros(&g)).unwrap();
        let rep = op.sigma_report(ND1_THRESHOLD);
        // Dense SVD of the bordered matrix as an oracle.
        let n = g.len();
        let mut m = nalgebra::DMatrix::<f64>::zeros(n + 1, n + 1);
        for col in 0..=n {
            let mut x = vec![0.0; n];
            let mut c = 0.0;
            if col < n {
                x[col] = 1.0;
            } else {
                c = 1.0;
            }
            let (y, yc) = op.apply_bordered(&x, c);
            for i in 0..n {
                m[(i, col)] = y[i];
            }
            m[(n, col)] = yc;
        }
        let sv = m.singular_values();
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        assert!((rep.sigma_min - smin).abs() < 1e-3 * smin, "{} {}", rep.sigma_min, smin);
        assert!((rep.op_norm - smax).abs() < 0.05 * smax);
        assert!(rep.nondegenerate);
    }
}
