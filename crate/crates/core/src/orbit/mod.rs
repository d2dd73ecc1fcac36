//! Level-set geometry of vorticity fields and the orbit calculus around
//! steady states.

pub mod chart;
pub mod dist;
pub mod flow;

use crate::elliptic::solve_ve;
use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, poisson_bracket, Field2D};
use crate::steady::SteadyState;

pub use chart::{j_functional, level_chart, LevelChart};
pub use dist::{d2q, dist_fn, dq, tangency_defect, DistFn, OrbitGeometry, PsiGeometry};
pub use flow::{pushforward, reconstruct_alpha};

/// Second variation of the energy on the orbit at a steady state in the
/// direction generated by `alpha`: `∫|∇φ|² + ∫ν²/F′(ψ)` with `ν = {ω, α}` and
/// `Δφ = ν` under zero-circulation conditions.
pub fn second_variation(state: &SteadyState, alpha: &Field2D) -> Result<f64> {
    let (lo, hi) = state.psi_range();
    let min = state.profile.min_slope_on(lo, hi);
    if !(min > 0.0) {
        return Err(Error::NonpositiveFprime { min });
    }
    let nu = poisson_bracket(&state.omega, alpha);
    let phi = solve_ve(&Field2D::zeros(state.grid()), &nu)?;
    let (a, b) = gradient(&phi);
    let fp = state.profile.compose_deriv(&state.psi);
    let dirichlet = integrate(&a.zip_map(&b, |x, y| x * x + y * y));
    let weighted = integrate(&nu.zip_map(&fp, |n, f| n * n / f));
    Ok(dirichlet + weighted)
}
