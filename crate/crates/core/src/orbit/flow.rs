//! Area-preserving flows along `∇⊥α` and the inverse problem `{ω, α} = ν`.

use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{make_annulus, AnnulusGrid, Field2D};
use crate::interp::FieldInterp;
use crate::orbit::chart::spectral_antiderivative;
use crate::orbit::dist::OrbitGeometry;

/// Largest tolerated overshoot of a trajectory past the boundary, in cells.
const EXIT_CELLS: f64 = 1.0;

/// `ω∘η_ε`: every grid node is carried by RK4 along `ẋ = ∇⊥α` for time `eps`
/// and `ω` is sampled bicubically at the endpoint.
pub fn pushforward(omega: &Field2D, alpha: &Field2D, eps: f64) -> Result<Field2D> {
    if eps == 0.0 {
        return Ok(omega.clone());
    }
    let g = omega.grid.clone();
    let ia = FieldInterp::new(alpha);
    let iw = FieldInterp::new(omega);
    let (lo, hi) = (g.r_inner, g.r_outer);
    let vel = |r: f64, t: f64| -> (f64, f64) {
        let (_, ar, at) = ia.eval_grad(r, t);
        (-at / r, ar / r)
    };
    // Step count from the largest speed so each step moves a fraction of a cell.
    let mut vmax = 0.0f64;
    for j in 0..g.nr {
        for k in 0..g.ns {
            let (a, b) = vel(g.r(j), g.theta(k));
            vmax = vmax.max(a.abs().max(g.r(j) * b.abs()));
        }
    }
    let hmin = g.hr.min(g.r_inner * g.dtheta);
    let steps = ((eps.abs() * vmax / (0.05 * hmin)).ceil() as usize).max(8);
    let dt = eps / steps as f64;
    let values: Vec<Result<f64>> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let (j, k) = (i / g.ns, i % g.ns);
            let (mut r, mut t) = (g.r(j), g.theta(k));
            for _ in 0..steps {
                let (a1, b1) = vel(r, t);
                let (a2, b2) = vel(r + 0.5 * dt * a1, t + 0.5 * dt * b1);
                let (a3, b3) = vel(r + 0.5 * dt * a2, t + 0.5 * dt * b2);
                let (a4, b4) = vel(r + dt * a3, t + dt * b3);
                r += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
                t += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
                if r < lo - EXIT_CELLS * g.hr || r > hi + EXIT_CELLS * g.hr {
                    return Err(Error::TrajectoryExit { r });
                }
                r = r.clamp(lo, hi);
            }
            Ok(iw.eval(r, t))
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(Field2D { grid: g, values })
}

/// Solves `{ω, α} = ν` along level rings. On each ring `∂_s α = |∂z/∂s| ν/|∇ω|`,
/// integrated spectrally, with the arclength mean of `α` set to zero on every
/// level. The chart-coordinate solution is mapped back to the grid by
/// inverting the chart at each node.
pub fn reconstruct_alpha(geom: &OrbitGeometry, nu: &Field2D) -> Result<Field2D> {
    let defect = geom.tangency_defect(nu).sup_norm();
    let tol = geom.tangent_tol(nu);
    if defect > tol {
        return Err(Error::NotTangent { defect, tol });
    }
    let chart = &geom.chart;
    let g = &chart.grid;
    let (nt, ns) = (chart.nt, chart.ns);
    let nu_nodes = chart.sample(nu);
    let mut planner = FftPlanner::new();
    let mut alpha_nodes = vec![0.0; nt * ns];
    for m in 0..nt {
        let row = m * ns..(m + 1) * ns;
        let q: Vec<f64> = (row.clone())
            .map(|i| chart.arc_weight[i] * nu_nodes[i] / chart.grad_norm[i])
            .collect();
        let mean = q.iter().sum::<f64>() / ns as f64;
        let q0: Vec<f64> = q.iter().map(|v| v - mean).collect();
        let a = spectral_antiderivative(&mut planner, &q0);
        let arc_sum: f64 = chart.arc_weight[row.clone()].iter().sum();
        let amean = a.iter().zip(&chart.arc_weight[row]).map(|(x, w)| x * w).sum::<f64>() / arc_sum;
        for k in 0..ns {
            alpha_nodes[m * ns + k] = a[k] - amean;
        }
    }
    let inv = ChartInverse::new(geom)?;
    let alpha_interp = inv.interp(&alpha_nodes)?;
    let values = (0..g.len())
        .map(|i| {
            let (j, k) = (i / g.ns, i % g.ns);
            let (tau, phi) = inv.locate(geom.omega.values[i], g.r(j), g.theta(k));
            alpha_interp.eval(tau, phi)
        })
        .collect();
    Ok(Field2D { grid: g.clone(), values })
}

/// Interpolants of the chart map over the parameter rectangle, used to find
/// the chart coordinates `(t, s)` of arbitrary points.
struct ChartInverse<'a> {
    geom: &'a OrbitGeometry,
    param: Arc<AnnulusGrid>,
    x: FieldInterp,
    y: FieldInterp,
}

impl<'a> ChartInverse<'a> {
    fn new(geom: &'a OrbitGeometry) -> Result<Self> {
        let c = &geom.chart;
        // Parameter grid: "radius" 1 + t on [1, 2], "angle" 2πs.
        let param = make_annulus(1.0, 2.0, c.nt, c.ns)?;
        let xv: Vec<f64> = c.z.iter().map(|&(r, t)| r * t.cos()).collect();
        let yv: Vec<f64> = c.z.iter().map(|&(r, t)| r * t.sin()).collect();
        let x = FieldInterp::new(&Field2D { grid: param.clone(), values: xv });
        let y = FieldInterp::new(&Field2D { grid: param.clone(), values: yv });
        Ok(Self { geom, param, x, y })
    }

    fn interp(&self, nodes: &[f64]) -> Result<FieldInterp> {
        Ok(FieldInterp::new(&Field2D::from_values(&self.param, nodes.to_vec())?))
    }

    /// Parameter coordinates `(1 + t, 2πs)` of the point `(r, θ)` with value `w`.
    fn locate(&self, w: f64, r: f64, theta: f64) -> (f64, f64) {
        let c = &self.geom.chart;
        let t0 = ((w - c.omega_min) / (c.omega_max - c.omega_min)).clamp(0.0, 1.0);
        let (px, py) = (r * theta.cos(), r * theta.sin());
        let mut tau = 1.0 + t0;
        let mut phi = theta;
        for _ in 0..30 {
            let (xv, xt, xp) = self.x.eval_grad(tau, phi);
            let (yv, yt, yp) = self.y.eval_grad(tau, phi);
            let (fx, fy) = (xv - px, yv - py);
            let det = xt * yp - xp * yt;
            let dtau = (fx * yp - fy * xp) / det;
            let dphi = (xt * fy - yt * fx) / det;
            tau = (tau - dtau).clamp(1.0, 2.0);
            phi -= dphi;
            if dtau.abs() < 1e-14 && dphi.abs() < 1e-14 {
                break;
            }
        }
        (tau, phi.rem_euclid(TAU))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_annulus, poisson_bracket};

    #[test]
    fn radial_flow_leaves_radial_field() {
        let g = make_annulus(1.0, 2.0, 24, 48).unwrap();
        let w = Field2D::from_fn(&g, |r, _| r * r);
        let a = Field2D::from_fn(&g, |r, _| (r - 1.0) * (r - 2.0));
        let p = pushforward(&w, &a, 0.05).unwrap();
        assert!(p.sub(&w).sup_norm() < 1e-8);
        assert_eq!(pushforward(&w, &a, 0.0).unwrap().values, w.values);
    }

    #[test]
    fn reconstructs_angular_generator() {
        let g = make_annulus(1.0, 2.0, 32, 64).unwrap();
        let w = Field2D::from_fn(&g, |r, _| r * r);
        let geo = OrbitGeometry::new(&w, 32, 65).unwrap();
        let gfun = |r: f64| (r - 1.0) * (2.0 - r);
        let nu = Field2D::from_fn(&g, |r, t| -2.0 * gfun(r) * t.sin());
        let alpha = reconstruct_alpha(&geo, &nu).unwrap();
        let ex = Field2D::from_fn(&g, |r, t| gfun(r) * t.cos());
        assert!(alpha.sub(&ex).sup_norm() < 1e-5, "{}", alpha.sub(&ex).sup_norm());
        let res = poisson_bracket(&w, &alpha).sub(&nu);
        assert!(res.sup_norm() < 1e-3 * nu.sup_norm());
        let z = reconstruct_alpha(&geo, &Field2D::zeros(&g)).unwrap();
        assert!(z.sup_norm() < 1e-14);
        let e = reconstruct_alpha(&geo, &Field2D::constant(&g, 1.0)).unwrap_err();
        assert_eq!(e.code(), "not-tangent");
    }
}
