//! Distribution functions `A_ω(λ) = |{ω < λ}|`, their inverses `Q = A_ω⁻¹`,
//! and the first and second derivatives of `Q` with respect to `ω`.

use std::sync::Arc;

use crate::curve::{Curve1D, Monotone1D};
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, Field2D};
use crate::orbit::chart::{level_chart, LevelChart};

/// Number of nodes of the `μ`-grid on `[0, |Ω|]`.
pub const DEFAULT_N_MU: usize = 129;
/// Largest accepted relative discrepancy between the raw chart area and `|Ω|`.
pub const AREA_TOL: f64 = 5e-3;

/// `A` on `[ω_min, ω_max]` and `A⁻¹` on `[0, |Ω|]`.
#[derive(Debug, Clone)]
pub struct DistFn {
    pub a: Monotone1D,
    pub ainv: Monotone1D,
    /// `A′ = J(1/|∇ω|)` on the chart levels (before renormalization).
    pub a_prime: Curve1D,
    /// Relative discrepancy of the raw area, removed by renormalization.
    pub area_discrepancy: f64,
}

/// Cumulative integral of a Hermite-interpolated curve at its nodes.
fn cumulative(c: &Curve1D) -> Vec<f64> {
    let h = c.h();
    let mut out = vec![0.0; c.len()];
    for i in 0..c.len() - 1 {
        let seg = 0.5 * h * (c.values[i] + c.values[i + 1]) + h * h / 12.0 * (c.slopes[i] - c.slopes[i + 1]);
        out[i + 1] = out[i] + seg;
    }
    out
}

/// `A(λ) = ∫_{ω_min}^λ J(1/|∇ω|)`, renormalized to `A(ω_max) = |Ω|`, with
/// `A⁻¹` sampled on `n_mu` nodes.
pub fn dist_fn_with(chart: &LevelChart, n_mu: usize) -> Result<DistFn> {
    let area = chart.grid.area;
    let a_prime = chart.j_of_nodes(&chart.inv_grad());
    let raw = cumulative(&a_prime);
    let total = *raw.last().unwrap();
    let discrepancy = (total - area) / area;
    if !(discrepancy.abs() <= AREA_TOL) {
        return Err(Error::AreaMismatch { relative: discrepancy });
    }
    let scale = area / total;
    let mut values: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    *values.last_mut().unwrap() = area;
    let slopes = a_prime.values.iter().map(|v| v * scale).collect();
    let a = Monotone1D::with_slopes(chart.omega_min, chart.omega_max, values, slopes)?;
    let ainv = a.inverse(n_mu)?;
    Ok(DistFn { a, ainv, a_prime, area_discrepancy: discrepancy })
}

/// Distribution function of `omega` from its chart.
pub fn dist_fn(_omega: &Field2D, chart: &LevelChart) -> Result<DistFn> {
    dist_fn_with(chart, DEFAULT_N_MU)
}

/// A field together with its chart and distribution function, the common
/// input of every level-set computation.
#[derive(Debug, Clone)]
pub struct OrbitGeometry {
    pub omega: Field2D,
    pub chart: LevelChart,
    pub dist: DistFn,
    /// `∇ω` polar components and `|∇ω|` on the grid.
    grad: (Field2D, Field2D),
    gnorm: Field2D,
}

/// The orbit geometry of a steady state's stream function.
pub type PsiGeometry = OrbitGeometry;

impl OrbitGeometry {
    pub fn new(omega: &Field2D, nt: usize, n_mu: usize) -> Result<Self> {
        let chart = level_chart(omega, nt)?;
        let dist = dist_fn_with(&chart, n_mu)?;
        let grad = gradient(omega);
        let gnorm = grad.0.zip_map(&grad.1, f64::hypot);
        Ok(Self { omega: omega.clone(), chart, dist, grad, gnorm })
    }

    /// Default resolution: `Nt = Nr`, `Nμ = 129`.
    pub fn build(omega: &Field2D) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(omega, omega.grid.nr, DEFAULT_N_MU)?))
    }

    pub fn area(&self) -> f64 {
        self.chart.grid.area
    }

    pub fn mu_nodes(&self) -> Vec<f64> {
        self.dist.ainv.curve.nodes()
    }

    /// `λ_i = A⁻¹(μ_i)` at the `μ`-nodes.
    pub fn lambda_at_mu(&self) -> &[f64] {
        &self.dist.ainv.curve.values
    }

    pub fn j(&self, u: &Field2D) -> Curve1D {
        self.chart.j_of_nodes(&self.chart.sample(u))
    }

    /// `J(v / |∇ω|)` with `v` given at chart nodes and `|∇ω|` from the chart.
    pub fn j_over_grad_nodes(&self, v: &[f64]) -> Curve1D {
        let w: Vec<f64> = v.iter().zip(&self.chart.grad_norm).map(|(a, g)| a / g).collect();
        self.chart.j_of_nodes(&w)
    }

    pub fn j_over_grad(&self, u: &Field2D) -> Curve1D {
        self.j_over_grad_nodes(&self.chart.sample(u))
    }

    /// Unit normal `N = ∇ω/|∇ω|` scaled by `u / |∇ω|`, as polar components.
    fn scaled_normal(&self, u: &Field2D) -> (Field2D, Field2D) {
        let g2 = self.gnorm.map(|g| g * g);
        let fac = u.zip_map(&g2, |a, b| a / b);
        (self.grad.0.mul(&fac), self.grad.1.mul(&fac))
    }

    /// `div(u N / |∇ω|)` on the grid.
    fn div_scaled(&self, u: &Field2D) -> Field2D {
        let (a, b) = self.scaled_normal(u);
        divergence(&a, &b)
    }

    /// `div(u N)` on the grid.
    pub fn div_normal(&self, u: &Field2D) -> Field2D {
        let fac = u.zip_map(&self.gnorm, |a, g| a / g);
        divergence(&self.grad.0.mul(&fac), &self.grad.1.mul(&fac))
    }

    /// `d/dλ J(u) = J(div(uN)/|∇ω|)` as a curve over the levels.
    pub fn dj_dlambda(&self, u: &Field2D) -> Curve1D {
        self.j_over_grad(&self.div_normal(u))
    }

    /// `∂_ε J_{ω+εν}(u) = −J(ν div(uN)/|∇ω|)` at fixed level.
    pub fn dj_depsilon(&self, u: &Field2D, nu: &Field2D) -> Curve1D {
        self.j_over_grad(&nu.mul(&self.div_normal(u))).scale(-1.0)
    }

    /// Evaluates a level curve at `λ_i = A⁻¹(μ_i)`.
    fn at_mu(&self, c: &Curve1D) -> Vec<f64> {
        self.lambda_at_mu().iter().map(|&l| c.eval(l)).collect()
    }

    fn mu_curve(&self, values: Vec<f64>) -> Curve1D {
        Curve1D::new(0.0, self.area(), values)
    }

    /// `DQ(ω)ν = J(ν/|∇ω|)∘A⁻¹ / J(1/|∇ω|)∘A⁻¹`.
    pub fn dq(&self, nu: &Field2D) -> Curve1D {
        let p = self.at_mu(&self.j_over_grad(nu));
        let a = self.at_mu(&self.dist.a_prime);
        self.mu_curve(p.iter().zip(&a).map(|(x, y)| x / y).collect())
    }

    /// Second derivative `D²Q(ω)(ν₁, ν₂)`.
    pub fn d2q(&self, nu1: &Field2D, nu2: &Field2D) -> Curve1D {
        let g = &self.omega.grid;
        let one = Field2D::constant(g, 1.0);
        let a = self.at_mu(&self.dist.a_prime);
        let p1 = self.at_mu(&self.j_over_grad(nu1));
        let p2 = self.at_mu(&self.j_over_grad(nu2));
        let d1 = self.at_mu(&self.j_over_grad(&self.div_scaled(nu1)));
        let d2 = self.at_mu(&self.j_over_grad(&self.div_scaled(nu2)));
        let d0 = self.at_mu(&self.j_over_grad(&self.div_scaled(&one)));
        let d12 = self.at_mu(&self.j_over_grad(&self.div_scaled(&nu1.mul(nu2))));
        let vals = (0..a.len())
            .map(|i| {
                let ai = a[i];
                (p1[i] * d2[i] + p2[i] * d1[i]) / (ai * ai) - d0[i] * p1[i] * p2[i] / (ai * ai * ai) - d12[i] / ai
            })
            .collect();
        self.mu_curve(vals)
    }

    /// `λ ↦ J(ν/|∇ω|)(λ)`; zero exactly for directions tangent to the orbit.
    pub fn tangency_defect(&self, nu: &Field2D) -> Curve1D {
        self.j_over_grad(nu)
    }

    /// Default tangency tolerance `1e-6 ‖ν‖₀ |Ω|`.
    pub fn tangent_tol(&self, nu: &Field2D) -> f64 {
        1e-6 * nu.sup_norm() * self.area()
    }
}

/// `DQ(ω)ν` on the `μ`-grid.
pub fn dq(geom: &OrbitGeometry, nu: &Field2D) -> Curve1D {
    geom.dq(nu)
}

/// `D²Q(ω)(ν₁, ν₂)` on the `μ`-grid.
pub fn d2q(geom: &OrbitGeometry, nu1: &Field2D, nu2: &Field2D) -> Curve1D {
    geom.d2q(nu1, nu2)
}

/// Tangency defect curve `λ ↦ ∮_{ω=λ} ν/|∇ω| dl`.
pub fn tangency_defect(geom: &OrbitGeometry, nu: &Field2D) -> Curve1D {
    geom.tangency_defect(nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_annulus;
    use std::f64::consts::PI;

    #[test]
    fn radial_distribution_closed_form() {
        let g = make_annulus(1.0, 2.0, 32, 64).unwrap();
        let w = Field2D::from_fn(&g, |r, _| r * r);
        let geo = OrbitGeometry::new(&w, 32, 65).unwrap();
        assert!((geo.dist.ainv.eval(PI) - 2.0).abs() < 1e-5);
        for i in 0..40 {
            let mu = 3.0 * PI * i as f64 / 39.0;
            assert!((geo.dist.ainv.eval(mu) - (1.0 + mu / PI)).abs() < 1e-5);
            let lam = 1.0 + 3.0 * i as f64 / 39.0;
            assert!((geo.dist.ainv.eval(geo.dist.a.eval(lam)) - lam).abs() < 1e-8);
        }
        let one = Field2D::constant(&g, 1.0);
        assert!(geo.dq(&one).values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(geo.d2q(&one, &one).sup_norm() < 1e-5);
        let nu = Field2D::from_fn(&g, |r, t| -2.0 * (r - 1.0) * t.sin());
        assert!(geo.dq(&nu).sup_norm() < 1e-6);
    }
}
