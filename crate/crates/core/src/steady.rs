//! The nonlinear solution operator `ψ = S(F)` for `Δψ = F(ψ)` with the
//! circulation boundary conditions, its first and second derivatives in `F`,
//! and the energy functional.

use std::sync::{Arc, OnceLock};

use crate::elliptic::{solve_poisson, EllipticOperator, NdReport, ND1_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, inner_product, AnnulusGrid, Field2D};
use crate::profile::Profile1D;

/// Absolute max-norm tolerance on the discrete residual `Δψ − F(ψ)`.
pub const TOL_NEWTON: f64 = 1e-9;
pub const MAX_NEWTON: usize = 50;
const MAX_HALVINGS: usize = 5;

/// A certified solution of `Δψ = F(ψ)` with its boundary data.
#[derive(Debug)]
pub struct SteadyState {
    pub profile: Profile1D,
    pub psi: Field2D,
    pub omega: Field2D,
    pub gamma: f64,
    pub inner_value: f64,
    pub newton_residual: f64,
    /// Residual after each Newton step (entry 0 is the initial guess).
    pub newton_history: Vec<f64>,
    linear_op: OnceLock<Arc<EllipticOperator>>,
    pub(crate) geometry: OnceLock<Arc<crate::orbit::PsiGeometry>>,
    pub(crate) id_plus_k: OnceLock<Arc<crate::moser::IdPlusK>>,
}

impl Clone for SteadyState {
    fn clone(&self) -> Self {
        let s = Self::assemble(
            self.profile.clone(),
            self.psi.clone(),
            self.gamma,
            self.inner_value,
            self.newton_residual,
            self.newton_history.clone(),
        );
        if let Some(op) = self.linear_op.get() {
            let _ = s.linear_op.set(op.clone());
        }
        if let Some(g) = self.geometry.get() {
            let _ = s.geometry.set(g.clone());
        }
        if let Some(m) = self.id_plus_k.get() {
            let _ = s.id_plus_k.set(m.clone());
        }
        s
    }
}

/// Interior-row residual `Δψ − F(ψ)` (boundary rows are exact constraints).
pub fn steady_residual(profile: &Profile1D, psi: &Field2D) -> Field2D {
    let mut r = crate::grid::laplacian(psi).sub(&profile.compose(psi));
    let g = &psi.grid;
    for k in 0..g.ns {
        r.values[g.idx(0, k)] = 0.0;
        r.values[g.idx(g.nr - 1, k)] = 0.0;
    }
    r
}

fn check_range(profile: &Profile1D, psi: &Field2D) -> Result<()> {
    let (min, max) = (psi.min(), psi.max());
    let (lo, hi) = (profile.lo(), profile.hi());
    let slack = 1e-12 * (hi - lo);
    if min < lo - slack || max > hi + slack {
        return Err(Error::RangeEscape { min, max, lo, hi });
    }
    Ok(())
}

impl SteadyState {
    fn assemble(
        profile: Profile1D,
        psi: Field2D,
        gamma: f64,
        inner_value: f64,
        newton_residual: f64,
        newton_history: Vec<f64>,
    ) -> Self {
        let omega = profile.compose(&psi);
        Self {
            profile,
            psi,
            omega,
            gamma,
            inner_value,
            newton_residual,
            newton_history,
            linear_op: OnceLock::new(),
            geometry: OnceLock::new(),
            id_plus_k: OnceLock::new(),
        }
    }

    /// Wraps an externally produced `(F, ψ, γ)` without Newton iteration; the
    /// residual is recomputed and stored.
    pub fn from_parts(profile: Profile1D, psi: Field2D, gamma: f64) -> Self {
        let inner_value = psi.ring_mean(0);
        let res = steady_residual(&profile, &psi).sup_norm();
        Self::assemble(profile, psi, gamma, inner_value, res, vec![res])
    }

    pub fn grid(&self) -> &Arc<AnnulusGrid> {
        &self.psi.grid
    }

    /// Factored linearization `Δ − F′(ψ)` at this state.
    pub fn linear_operator(&self) -> Result<Arc<EllipticOperator>> {
        if let Some(op) = self.linear_op.get() {
            return Ok(op.clone());
        }
        let c = self.profile.compose_deriv(&self.psi).scale(-1.0);
        let op = Arc::new(EllipticOperator::new(&c)?);
        let _ = self.linear_op.set(op);
        Ok(self.linear_op.get().unwrap().clone())
    }

    /// Chart, distribution function and gradient data of `ψ`, built once.
    pub fn psi_geometry(&self) -> Result<Arc<crate::orbit::PsiGeometry>> {
        if let Some(g) = self.geometry.get() {
            return Ok(g.clone());
        }
        let g = crate::orbit::OrbitGeometry::build(&self.psi)?;
        let _ = self.geometry.set(g);
        Ok(self.geometry.get().unwrap().clone())
    }

    /// `min ψ` and `max ψ`.
    pub fn psi_range(&self) -> (f64, f64) {
        (self.psi.min(), self.psi.max())
    }
}

/// Newton iteration for `Δψ = F(ψ)`. Each step solves
/// `Δφ − F′(ψ_k)φ = F(ψ_k) − Δψ_k` with zero circulation, then halves the step
/// (up to five times) if the residual does not decrease.
/// The default initial guess is `solve_poisson(F(0)·1, γ)`.
pub fn solve_steady(
    grid: &Arc<AnnulusGrid>,
    profile: &Profile1D,
    gamma: f64,
    psi0: Option<&Field2D>,
) -> Result<SteadyState> {
    let mut psi = match psi0 {
        Some(p) => p.clone(),
        None => {
            let f0 = profile.eval(0.0_f64.clamp(profile.lo(), profile.hi()));
            solve_poisson(&Field2D::constant(grid, f0), gamma)?.0
        }
    };
    check_range(profile, &psi)?;
    let mut res = steady_residual(profile, &psi);
    let mut rn = res.sup_norm();
    let mut history = vec![rn];
    let mut last_op: Option<(Arc<EllipticOperator>, f64)> = None;
    for it in 0..=MAX_NEWTON {
        if rn < TOL_NEWTON {
            let inner = psi.ring_mean(0);
            let state = SteadyState::assemble(profile.clone(), psi, gamma, inner, rn, history);
            // Reuse the last factorization when it was built at (numerically) this ψ.
            if let Some((op, step)) = last_op {
                if step < 1e-13 {
                    let _ = state.linear_op.set(op);
                }
            }
            return Ok(state);
        }
        if it == MAX_NEWTON {
            break;
        }
        let c = profile.compose_deriv(&psi).scale(-1.0);
        let op = Arc::new(EllipticOperator::new(&c)?);
        let (dphi, _) = op.solve(&res.scale(-1.0), 0.0);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = psi.axpy(lambda, &dphi);
            if check_range(profile, &trial).is_ok() {
                let tr = steady_residual(profile, &trial);
                let tn = tr.sup_norm();
                if tn < rn || rn < 10.0 * TOL_NEWTON {
                    accepted = Some((trial, tr, tn));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let (trial, tr, tn) = match accepted {
            Some(a) => a,
            None => {
                // No decrease: take the full step anyway so range checks report properly.
                let trial = psi.axpy(1.0, &dphi);
                check_range(profile, &trial)?;
                let tr = steady_residual(profile, &trial);
                let tn = tr.sup_norm();
                (trial, tr, tn)
            }
        };
        let step = dphi.sup_norm() * lambda;
        psi = trial;
        res = tr;
        rn = tn;
        history.push(rn);
        last_op = Some((op, step));
    }
    Err(Error::NoConvergence { iterations: MAX_NEWTON, residual: rn })
}

/// Interval `[2·min ψ, hi]` (with `hi = 0`, or `2·max ψ` when ψ is positive
/// somewhere) that leaves headroom for perturbed solutions.
pub fn profile_interval(psi: &Field2D) -> (f64, f64) {
    let (min, max) = (psi.min(), psi.max());
    let span = (max - min).max(1e-6);
    let lo = if min < 0.0 { 2.0 * min } else { -0.5 * span };
    let hi = if max > 1e-12 { 2.0 * max } else { 0.0 };
    (lo, hi)
}

/// Solves `Δψ = F(ψ)` for an analytic profile whose interval is not known in
/// advance: a first solve on a wide interval locates the range of ψ, then `F`
/// is resampled on [`profile_interval`] (with exact slopes when `df` is
/// given) and the state is re-solved from the first solution.
pub fn solve_steady_adapted(
    grid: &Arc<AnnulusGrid>,
    f: &dyn Fn(f64) -> f64,
    df: Option<&dyn Fn(f64) -> f64>,
    gamma: f64,
    samples: usize,
) -> Result<SteadyState> {
    let make = |lo: f64, hi: f64| match df {
        Some(d) => Profile1D::from_fn_with_derivative(lo, hi, samples, f, d),
        None => Profile1D::from_fn(lo, hi, samples, f),
    };
    let guess = solve_poisson(&Field2D::constant(grid, f(0.0)), gamma)?.0;
    let w = 10.0 * guess.sup_norm().max(1.0);
    let wide = solve_steady(grid, &make(-w, w), gamma, Some(&guess))?;
    let (lo, hi) = profile_interval(&wide.psi);
    solve_steady(grid, &make(lo, hi), gamma, Some(&wide.psi))
}

/// Smallest singular value of the bordered linearization `Δ − F′(ψ)` with
/// zero-circulation conditions, relative to its norm.
pub fn check_nd1(state: &SteadyState) -> NdReport {
    if let Some(op) = state.linear_op.get() {
        return op.sigma_report(ND1_THRESHOLD);
    }
    let c = state.profile.compose_deriv(&state.psi).scale(-1.0);
    EllipticOperator::new_unchecked(&c).sigma_report(ND1_THRESHOLD)
}

/// First derivative `DS(F) f`: solves `Δφ − F′(ψ)φ = f(ψ)` with zero circulation.
pub fn ds(state: &SteadyState, f: &Profile1D) -> Result<Field2D> {
    let op = state.linear_operator()?;
    Ok(op.solve(&f.compose(&state.psi), 0.0).0)
}

/// Second derivative `D²S(F)(f1, f2)`: solves
/// `Δφ₁₂ − F′(ψ)φ₁₂ = F″(ψ)φ₁φ₂ + f₂′(ψ)φ₁ + f₁′(ψ)φ₂`.
pub fn d2s(state: &SteadyState, f1: &Profile1D, f2: &Profile1D) -> Result<Field2D> {
    let op = state.linear_operator()?;
    let psi = &state.psi;
    let phi1 = op.solve(&f1.compose(psi), 0.0).0;
    let phi2 = op.solve(&f2.compose(psi), 0.0).0;
    let fpp = state.profile.compose_deriv2(psi);
    let d1 = f1.compose_deriv(psi);
    let d2 = f2.compose_deriv(psi);
    let rhs = Field2D {
        grid: psi.grid.clone(),
        values: (0..psi.values.len())
            .map(|i| {
                fpp.values[i] * phi1.values[i] * phi2.values[i]
                    + d2.values[i] * phi1.values[i]
                    + d1.values[i] * phi2.values[i]
            })
            .collect(),
    };
    Ok(op.solve(&rhs, 0.0).0)
}

/// Energy `½∫|∇ψ|²` and its Green-identity form `−½∫ωψ + ½γψ|Γ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub gradient_form: f64,
    pub green_form: f64,
}

impl Energy {
    pub fn value(&self) -> f64 {
        self.gradient_form
    }
    pub fn discrepancy(&self) -> f64 {
        (self.gradient_form - self.green_form).abs()
    }
}

pub fn energy_of(psi: &Field2D, omega: &Field2D, gamma: f64, inner_value: f64) -> Energy {
    let (a, b) = gradient(psi);
    let g2 = a.zip_map(&b, |x, y| x * x + y * y);
    Energy {
        gradient_form: 0.5 * integrate(&g2),
        green_form: -0.5 * inner_product(omega, psi) + 0.5 * gamma * inner_value,
    }
}

pub fn energy(state: &SteadyState) -> Energy {
    energy_of(&state.psi, &state.omega, state.gamma, state.inner_value)
}

/// Energy of the flow with vorticity `omega` and circulation `gamma`.
pub fn energy_from_vorticity(omega: &Field2D, gamma: f64) -> Result<Energy> {
    let (psi, c) = solve_poisson(omega, gamma)?;
    Ok(energy_of(&psi, omega, gamma, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_annulus;
    use std::f64::consts::{LN_2, PI, TAU};

    #[test]
    fn harmonic_state_one_step() {
        let g = make_annulus(1.0, 2.0, 48, 96).unwrap();
        let f = Profile1D::from_fn(-2.0, 0.0, 65, |_| 0.0);
        let st = solve_steady(&g, &f, -TAU, None).unwrap();
        let ex = Field2D::from_fn(&g, |r, _| (r / 2.0).ln());
        assert!(st.psi.sub(&ex).sup_norm() < 10.0 * g.hr * g.hr);
        assert!(st.newton_history.len() <= 2);
        let e = energy(&st);
        assert!((e.value() - PI * LN_2).abs() < 1e-3);
        assert!(e.discrepancy() < 1e-3);
    }

    #[test]
    fn range_escape_is_reported() {
        let g = make_annulus(1.0, 2.0, 24, 48).unwrap();
        let f = Profile1D::from_fn(-0.1, 0.0, 65, |s| s - 1.0);
        let err = solve_steady(&g, &f, -4.0 * PI, None).unwrap_err();
        assert_eq!(err.code(), "range-escape");
    }

    #[test]
    fn linear_profile_converges_quadratically_and_ds_matches_fd() {
        let g = make_annulus(1.0, 2.0, 24, 48).unwrap();
        let f = Profile1D::from_fn(-2.0, 0.0, 129, |s| s + 0.3 * s * s - 1.0);
        let st = solve_steady(&g, &f, -4.0 * PI, None).unwrap();
        assert!(st.newton_residual < TOL_NEWTON);
        let dir = Profile1D::from_fn(-2.0, 0.0, 129, |s| (2.0 * s).cos());
        let phi = ds(&st, &dir).unwrap();
        let mut errs = Vec::new();
        for eps in [1e-3, 5e-4] {
            let sp = solve_steady(&g, &f.lincomb(1.0, &dir, eps), -4.0 * PI, Some(&st.psi)).unwrap();
            errs.push(sp.psi.sub(&st.psi).axpy(-eps, &phi).sup_norm());
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.6 && ratio < 4.4, "ratio {ratio}");
        let a = d2s(&st, &dir, &f).unwrap();
        let b = d2s(&st, &f, &dir).unwrap();
        assert!(a.sub(&b).sup_norm() < 1e-9 * a.sup_norm().max(1.0));
    }
}
