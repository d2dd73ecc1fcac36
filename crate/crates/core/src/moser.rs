//! The map `T(F) = A_ω⁻¹` from vorticity profiles to distribution functions,
//! its linearization `DT(F) = B(F) + K̃(F)`, the right inverse
//! `L(F) = VB(F)·(Id + K(F))⁻¹`, and a smoothed Newton iteration that inverts
//! `T` near a non-degenerate steady state.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::curve::{Curve1D, Monotone1D};
use crate::elliptic::NdReport;
use crate::error::{Error, Result};
use crate::grid::{AnnulusGrid, Field2D};
use crate::orbit::OrbitGeometry;
use crate::profile::Profile1D;
use crate::steady::{ds, solve_steady, SteadyState};
use crate::tame::{smooth, SmoothingFamily};

/// Threshold on `σ_min(Id + K)` below which the collocation system is treated as singular.
pub const ND2_THRESHOLD: f64 = 1e-8;
/// Relative agreement required between the two ways of computing `T(F)`, in units of `h²`.
pub const PATH_TOL_H2: f64 = 5.0;

/// Parameters of the Moser iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MoserConfig {
    /// Base `A` of the schedule `t_n = A^{κⁿ}`.
    pub a: f64,
    pub kappa: f64,
    pub mu: f64,
    pub beta: f64,
    /// Smoothing order.
    pub j: usize,
    pub max_iter: usize,
    /// Stop when the sup-norm residual of `T(F_n) − g` drops below this.
    pub floor_tol: f64,
}

impl Default for MoserConfig {
    fn default() -> Self {
        Self { a: 2.0, kappa: 1.35, mu: 1.6, beta: 3.0, j: 9, max_iter: 30, floor_tol: 1e-8 }
    }
}

impl MoserConfig {
    /// Checks the parameter constraints of the convergence argument:
    /// `A > 1`, `1 < κ < 2`, `μ ≥ 1/(2−κ)`, `1 − β(κ−1) < 0` and
    /// `μκ² + κ + 1 − j + β < 0`.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(self.a > 1.0) {
            return fail(format!("A = {} must exceed 1", self.a));
        }
        if !(self.kappa > 1.0 && self.kappa < 2.0) {
            return fail(format!("kappa = {} must lie in (1, 2)", self.kappa));
        }
        if self.mu < 1.0 / (2.0 - self.kappa) {
            return fail(format!("mu = {} is below 1/(2 - kappa)", self.mu));
        }
        if 1.0 - self.beta * (self.kappa - 1.0) >= 0.0 {
            return fail(format!("beta = {} too small: 1 - beta(kappa - 1) must be negative", self.beta));
        }
        let s = self.mu * self.kappa * self.kappa + self.kappa + 1.0 - self.j as f64 + self.beta;
        if s >= 0.0 {
            return fail(format!("mu kappa^2 + kappa + 1 - j + beta = {s} must be negative"));
        }
        if self.max_iter == 0 || !(self.floor_tol > 0.0) {
            return fail("max_iter and floor_tol must be positive".into());
        }
        Ok(())
    }

    /// Smoothing parameter `t_n = A^{κⁿ}`.
    pub fn t(&self, n: usize) -> f64 {
        self.a.powf(self.kappa.powi(n as i32))
    }
}

/// `T(F)` together with the steady state it came from.
#[derive(Debug, Clone)]
pub struct TValue {
    /// `F∘A_ψ⁻¹` on `[0, |Ω|]`.
    pub t: Monotone1D,
    pub state: SteadyState,
    /// Relative sup-norm distance to `A_ω⁻¹` computed directly from `ω`.
    pub path_mismatch: f64,
    pub paths_agree: bool,
}

/// `F∘A_ψ⁻¹` with slopes `F′(A_ψ⁻¹)·(A_ψ⁻¹)′`.
pub fn t_of_state(state: &SteadyState) -> Result<Monotone1D> {
    let geo = state.psi_geometry()?;
    let ainv = &geo.dist.ainv.curve;
    let f = &state.profile;
    let values = ainv.values.iter().map(|&l| f.eval(l)).collect();
    let slopes = ainv.values.iter().zip(&ainv.slopes).map(|(&l, &d)| f.deriv(l) * d).collect();
    Monotone1D::with_slopes(ainv.lo, ainv.hi, values, slopes)
}

/// Relative sup distance between `T` and the distribution function of `ω`
/// computed from its own level chart.
pub fn path_mismatch(state: &SteadyState, t: &Monotone1D) -> Result<f64> {
    let direct = OrbitGeometry::new(&state.omega, state.grid().nr, t.len())?;
    let d = &direct.dist.ainv.curve;
    let scale = d.sup_norm().max(1e-300);
    Ok(t.curve.dist(d) / scale)
}

/// Solves the steady problem for `F` and returns `T(F)` with its cross-check.
pub fn t_map(grid: &Arc<AnnulusGrid>, f: &Profile1D, gamma: f64, psi0: Option<&Field2D>) -> Result<TValue> {
    let state = solve_steady(grid, f, gamma, psi0)?;
    t_value(state)
}

fn t_value(state: SteadyState) -> Result<TValue> {
    let t = t_of_state(&state)?;
    let path_mismatch = path_mismatch(&state, &t)?;
    let h = state.grid().hr;
    Ok(TValue { t, path_mismatch, paths_agree: path_mismatch <= PATH_TOL_H2 * h * h, state })
}

/// The two terms of `DT(F)f` on the `μ`-grid: `B(F)f = f∘A_ψ⁻¹` and
/// `K̃(F)f = F′(A_ψ⁻¹)·J_ψ(φ/|∇ψ|)∘A_ψ⁻¹ / J_ψ(1/|∇ψ|)∘A_ψ⁻¹` with `φ = DS(F)f`.
pub fn dt_parts(state: &SteadyState, f: &Profile1D) -> Result<(Curve1D, Curve1D)> {
    let geo = state.psi_geometry()?;
    let phi = ds(state, f)?;
    let q = geo.dq(&phi);
    let lam = geo.lambda_at_mu();
    let b: Vec<f64> = lam.iter().map(|&l| f.eval(l)).collect();
    let k: Vec<f64> = lam.iter().zip(&q.values).map(|(&l, v)| state.profile.deriv(l) * v).collect();
    Ok((Curve1D::new(0.0, geo.area(), b), Curve1D::new(0.0, geo.area(), k)))
}

/// `DT(F)f` on the `μ`-grid.
pub fn dt(state: &SteadyState, f: &Profile1D) -> Result<Curve1D> {
    let (b, k) = dt_parts(state, f)?;
    Ok(b.add(&k))
}

/// Right inverse of `B(F)`: `f = g∘A_ψ` on the range of ψ. Below `min ψ` the
/// linear continuation with matching slope is tapered by `cos²(πd/2)`, `d`
/// running from 0 at `min ψ` to 1 at the end of the interval (likewise above
/// `max ψ` when the interval extends past it). Node slopes are exact.
pub fn vb(state: &SteadyState, g: &Curve1D) -> Result<Profile1D> {
    let geo = state.psi_geometry()?;
    let a = &geo.dist.a;
    let (pmin, pmax) = (a.lo(), a.hi());
    let prof = &state.profile;
    let (lo, hi, n) = (prof.lo(), prof.hi(), prof.len());
    let h = (hi - lo) / (n - 1) as f64;
    let tail = |s: f64, s0: f64, end: f64, mu0: f64| -> (f64, f64) {
        let slope = g.deriv(mu0) * a.deriv(s0);
        let lin = g.eval(mu0) + slope * (s - s0);
        let len = (end - s0).abs();
        if len == 0.0 {
            return (lin, slope);
        }
        let d = (s - s0).abs() / len;
        let c = (0.5 * PI * d).cos();
        let dtap = -(PI * d).sin() * 0.5 * PI / len * (s - s0).signum();
        (lin * c * c, slope * c * c + lin * dtap)
    };
    let (values, slopes): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let s = if i == n - 1 { hi } else { lo + i as f64 * h };
            if s < pmin {
                tail(s, pmin, lo, 0.0)
            } else if s > pmax {
                tail(s, pmax, hi, geo.area())
            } else {
                let mu = a.eval(s);
                (g.eval(mu), g.deriv(mu) * a.deriv(s))
            }
        })
        .unzip();
    Ok(Profile1D { curve: Curve1D::with_slopes(lo, hi, values, slopes) })
}

/// `K(F)g = K̃(F)·VB(F)g`, so that `DT(F)·VB(F) = Id + K(F)` on the `μ`-grid.
pub fn k_apply(state: &SteadyState, g: &Curve1D) -> Result<Curve1D> {
    let f = vb(state, g)?;
    Ok(dt_parts(state, &f)?.1)
}

/// Dense collocation matrix of `Id + K(F)` on the `μ`-grid with its LU
/// factorization and extreme singular values.
#[derive(Debug)]
pub struct IdPlusK {
    pub matrix: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    area: f64,
}

impl IdPlusK {
    /// One `k_apply` per nodal basis function, in parallel.
    pub fn assemble(state: &SteadyState) -> Result<Self> {
        let geo = state.psi_geometry()?;
        let n = geo.mu_nodes().len();
        let area = geo.area();
        let cols: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                Ok(k_apply(state, &Curve1D::new(0.0, area, e))?.values)
            })
            .collect();
        let mut m = DMatrix::<f64>::identity(n, n);
        for (j, col) in cols.into_iter().enumerate() {
            let col = col?;
            for i in 0..n {
                m[(i, j)] += col[i];
            }
        }
        let sv = m.clone().singular_values();
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        let lu = m.clone().lu();
        Ok(Self { matrix: m, lu, sigma_min, sigma_max, area })
    }

    pub fn report(&self) -> NdReport {
        NdReport::new(self.sigma_min, self.sigma_max, ND2_THRESHOLD)
    }

    /// Solves `(Id + K)g = h` with `h` sampled on the `μ`-grid.
    pub fn solve(&self, h: &Curve1D) -> Result<Curve1D> {
        if !(self.sigma_min > ND2_THRESHOLD) {
            return Err(Error::SingularIdPlusK { sigma_min: self.sigma_min });
        }
        let n = self.matrix.nrows();
        let rhs = if h.len() == n && h.lo == 0.0 && (h.hi - self.area).abs() <= 1e-12 * self.area {
            h.values.clone()
        } else {
            (0..n).map(|i| h.eval(self.area * i as f64 / (n - 1) as f64)).collect()
        };
        let g = self
            .lu
            .solve(&DVector::from_vec(rhs))
            .ok_or(Error::SingularIdPlusK { sigma_min: self.sigma_min })?;
        Ok(Curve1D::new(0.0, self.area, g.as_slice().to_vec()))
    }
}

/// The assembled `Id + K(F)` of a state, built once per state.
pub fn id_plus_k(state: &SteadyState) -> Result<Arc<IdPlusK>> {
    if let Some(m) = state.id_plus_k.get() {
        return Ok(m.clone());
    }
    let m = Arc::new(IdPlusK::assemble(state)?);
    let _ = state.id_plus_k.set(m);
    Ok(state.id_plus_k.get().unwrap().clone())
}

/// Solves `(Id + K(F))g = h`.
pub fn vm(state: &SteadyState, h: &Curve1D) -> Result<Curve1D> {
    id_plus_k(state)?.solve(h)
}

/// `L(F)h = VB(F)·VM(F)h`, a right inverse of `DT(F)`.
pub fn right_inverse(state: &SteadyState, h: &Curve1D) -> Result<Profile1D> {
    vb(state, &vm(state, h)?)
}

/// Smallest singular value of the collocated `Id + K(F)`, relative to its norm.
pub fn check_nd2(state: &SteadyState) -> Result<NdReport> {
    Ok(id_plus_k(state)?.report())
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub t_n: f64,
    /// `‖T(F_n) − g‖₀` on the `μ`-grid.
    pub residual: f64,
    /// `|F_{n+1} − F_n|₁`; zero on the final row.
    pub update_norm: f64,
    /// Relative mismatch between the two computations of `T(F_n)`.
    pub path_mismatch: f64,
    /// The smoothing cut off some resolved modes of the update.
    pub truncated: bool,
    /// The update needed the monotonicity repair.
    pub repaired: bool,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct MoserTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl MoserTrace {
    pub fn residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual).collect()
    }

    pub fn repairs(&self) -> usize {
        self.rows.iter().filter(|r| r.repaired).count()
    }

    /// CSV with header `n,t_n,residual,update_norm,path_mismatch,flags`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,t_n,residual,update_norm,path_mismatch,flags\n");
        for r in &self.rows {
            let mut flags = Vec::new();
            if r.truncated {
                flags.push("truncated");
            }
            if r.repaired {
                flags.push("repaired");
            }
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                r.n,
                r.t_n,
                r.residual,
                r.update_norm,
                r.path_mismatch,
                flags.join("|")
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct MoserOutcome {
    pub profile: Profile1D,
    pub state: SteadyState,
    pub t: Monotone1D,
    pub trace: MoserTrace,
}

/// A failed run keeps the trace recorded up to the failure.
#[derive(Debug, Clone)]
pub struct MoserFailure {
    pub error: Error,
    pub trace: MoserTrace,
}

impl From<MoserFailure> for Error {
    fn from(f: MoserFailure) -> Self {
        f.error
    }
}

/// Floors the node differences of `values` at `floor·h`, rebuilding from the
/// top node. Returns `true` when anything changed.
fn repair_monotone(values: &mut [f64], h: f64, floor: f64) -> bool {
    if values.windows(2).all(|w| w[1] > w[0]) {
        return false;
    }
    let n = values.len();
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).max(floor * h)).collect();
    for i in (0..n - 1).rev() {
        values[i] = values[i + 1] - diffs[i];
    }
    true
}

fn c1_norm(c: &Curve1D) -> f64 {
    c.values.iter().chain(&c.slopes).fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Smoothed Newton iteration `F_{n+1} = F_n − S(t_n)·L(F_n)·(T(F_n) − g)` with
/// `t_n = A^{κⁿ}`. Stops when `‖T(F_n) − g‖₀ < floor_tol` or after
/// `max_iter` updates; fails when the residual grows three times in a row.
pub fn moser_solve(
    grid: &Arc<AnnulusGrid>,
    f0: &Profile1D,
    gamma: f64,
    target: &Curve1D,
    cfg: &MoserConfig,
) -> std::result::Result<MoserOutcome, MoserFailure> {
    let mut trace = MoserTrace::default();
    if let Err(error) = cfg.validate() {
        return Err(MoserFailure { error, trace });
    }
    // No profile with F′ > 0 has a non-increasing distribution function.
    if !target.values.windows(2).all(|w| w[1] > w[0]) {
        return Err(MoserFailure { error: Error::Diverged { iteration: 0 }, trace });
    }
    let family = SmoothingFamily::default();
    let (lo, hi, nf) = (f0.lo(), f0.hi(), f0.len());
    let hf = (hi - lo) / (nf - 1) as f64;
    let ref_slope = f0.curve.values.windows(2).map(|w| (w[1] - w[0]) / hf).fold(f64::INFINITY, f64::min);
    let mut f = f0.clone();
    let mut psi_prev: Option<Field2D> = None;
    let mut growth = 0usize;
    let mut last = f64::INFINITY;
    for n in 0..=cfg.max_iter {
        let tv = match t_map(grid, &f, gamma, psi_prev.as_ref()) {
            Ok(tv) => tv,
            Err(e) => return Err(inner_failure(n, e, trace)),
        };
        let tn = &tv.t.curve;
        let g: Vec<f64> = tn.nodes().iter().map(|&m| target.eval(m)).collect();
        let diff = Curve1D::new(tn.lo, tn.hi, tn.values.iter().zip(&g).map(|(a, b)| a - b).collect());
        let residual = diff.sup_norm();
        let t_n = cfg.t(n);
        let mut row = TraceRow {
            n,
            t_n,
            residual,
            update_norm: 0.0,
            path_mismatch: tv.path_mismatch,
            truncated: false,
            repaired: false,
        };
        growth = if residual > last { growth + 1 } else { 0 };
        last = residual;
        if residual < cfg.floor_tol || n == cfg.max_iter {
            trace.rows.push(row);
            trace.converged = residual < cfg.floor_tol;
            return Ok(MoserOutcome { profile: f, t: tv.t, state: tv.state, trace });
        }
        if growth >= 3 {
            trace.rows.push(row);
            return Err(MoserFailure { error: Error::Diverged { iteration: n }, trace });
        }
        let delta = match right_inverse(&tv.state, &diff) {
            Ok(d) => d,
            Err(e) => {
                trace.rows.push(row);
                return Err(inner_failure(n, e, trace));
            }
        };
        let step = smooth(&delta.curve, t_n);
        row.truncated = t_n < family.identity_threshold(nf);
        row.update_norm = c1_norm(&step);
        let mut values: Vec<f64> = f.curve.values.iter().zip(&step.values).map(|(a, b)| a - b).collect();
        row.repaired = repair_monotone(&mut values, hf, 0.1 * ref_slope);
        trace.rows.push(row);
        f = Profile1D::new(lo, hi, values);
        psi_prev = Some(tv.state.psi.clone());
    }
    unreachable!("the loop returns at n == max_iter")
}

fn inner_failure(n: usize, e: Error, trace: MoserTrace) -> MoserFailure {
    MoserFailure { error: Error::InnerSolveFailure { iteration: n, source: Box::new(e) }, trace }
}

/// Outcome of comparing two steady states by their orbit labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    SameOrbitSameState,
    SameOrbitDifferentState,
    DifferentOrbit,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct UniquenessReport {
    /// `‖Q(ω_A) − Q(ω_B)‖₀`
    pub q_distance: f64,
    /// `‖ψ_A − ψ_B‖₀`
    pub psi_distance: f64,
    pub verdict: Verdict,
}

/// Local uniqueness check: states whose distribution functions agree within
/// `tol` must have stream functions within `10·tol·calibration`.
pub fn uniqueness_probe(a: &SteadyState, b: &SteadyState, tol: f64, calibration: f64) -> Result<UniquenessReport> {
    let qa = t_of_state(a)?;
    let qb = t_of_state(b)?;
    let q_distance = qa.curve.dist(&qb.curve);
    let psi_distance = a.psi.sub(&b.psi).sup_norm();
    let verdict = if q_distance >= tol {
        Verdict::DifferentOrbit
    } else if psi_distance < 10.0 * tol * calibration {
        Verdict::SameOrbitSameState
    } else {
        Verdict::SameOrbitDifferentState
    };
    Ok(UniquenessReport { q_distance, psi_distance, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_admissible() {
        let c = MoserConfig::default();
        c.validate().unwrap();
        assert_eq!(c.t(0), 2.0);
        assert_eq!(c.t(3), 2f64.powf(1.35f64.powi(3)));
        let bad = MoserConfig { j: 6, ..c };
        assert_eq!(bad.validate().unwrap_err().code(), "invalid-config");
        let bad = MoserConfig { kappa: 2.0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn repair_floors_differences() {
        let mut v = vec![0.0, 1.0, 0.5, 2.0];
        assert!(repair_monotone(&mut v, 1.0, 0.1));
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(v[3], 2.0);
        let mut w = vec![0.0, 1.0, 2.0];
        assert!(!repair_monotone(&mut w, 1.0, 0.1));
    }
}
