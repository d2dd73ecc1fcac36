use std::f64::consts::TAU;
use std::sync::Arc;

use steady_orbits::checks::reference_state;
use steady_orbits::grid::{circulation, make_annulus, AnnulusGrid, Boundary, Field2D};
use steady_orbits::reference::{radial_linear, radial_steady};
use steady_orbits::steady::{d2s, ds, energy_from_vorticity, solve_steady, solve_steady_adapted};
use steady_orbits::{Profile1D, SteadyState};

fn grid(nr: usize) -> Arc<AnnulusGrid> {
    make_annulus(1.0, 2.0, nr, 2 * nr).unwrap()
}

fn on_profile(st: &SteadyState, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Profile1D {
    Profile1D::from_fn_with_derivative(st.profile.lo(), st.profile.hi(), st.profile.len(), f, df)
}

fn max_diff(a: &Field2D, b: &Field2D) -> f64 {
    a.sub(b).sup_norm()
}

#[test]
fn ds_matches_radial_linearized_oracle() {
    let g = grid(64);
    let st = solve_steady_adapted(&g, &|s| 0.5 * s - 1.0, Some(&|_| 0.5), -TAU, 1025).unwrap();
    let f = on_profile(&st, |s| 1.0 + 0.3 * s, |_| 0.3);
    assert_eq!(ds(&st, &Profile1D::zeros(st.profile.lo(), st.profile.hi(), 65)).unwrap().sup_norm(), 0.0);
    let phi = ds(&st, &f).unwrap();
    let psi = radial_steady(&|s| 0.5 * s - 1.0, 1.0, 2.0, -TAU, 8000).unwrap();
    let oracle = radial_linear(&|_| 0.5, &|r| 1.0 + 0.3 * psi.eval(r), 1.0, 2.0, 8000);
    let worst = (0..g.nr)
        .flat_map(|j| (0..g.ns).map(move |k| (j, k)))
        .map(|(j, k)| (phi.at(j, k) - oracle.eval(g.r(j))).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn ds_is_the_derivative_of_the_solution_map() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let f = on_profile(&st, |s| (0.7 * s).cos(), |s| -0.7 * (0.7 * s).sin());
    let phi = ds(&st, &f).unwrap();
    let remainder = |eps: f64| {
        let moved = solve_steady(&g, &st.profile.lincomb(1.0, &f, eps), st.gamma, Some(&st.psi)).unwrap();
        moved.psi.sub(&st.psi).axpy(-eps, &phi).sup_norm()
    };
    let ratio = remainder(1e-3) / remainder(5e-4);
    assert!((3.6..=4.4).contains(&ratio), "{ratio}");
}

#[test]
fn d2s_symmetry_and_second_difference() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let zero = Profile1D::zeros(st.profile.lo(), st.profile.hi(), st.profile.len());
    assert_eq!(d2s(&st, &zero, &zero).unwrap().sup_norm(), 0.0);
    let f1 = on_profile(&st, |s| 1.0 + s * s, |s| 2.0 * s);
    let f2 = on_profile(&st, |s| (0.5 * s).sin(), |s| 0.5 * (0.5 * s).cos());
    assert!(max_diff(&d2s(&st, &f1, &f2).unwrap(), &d2s(&st, &f2, &f1).unwrap()) < 1e-10);

    // S(F+εf) − 2S(F) + S(F−εf) − ε²φ₁₁ is O(ε⁴) by symmetry of the expansion.
    let phi11 = d2s(&st, &f1, &f1).unwrap();
    let second = |eps: f64| {
        let solve = |e: f64| solve_steady(&g, &st.profile.lincomb(1.0, &f1, e), st.gamma, Some(&st.psi)).unwrap().psi;
        let dd = solve(eps).axpy(-2.0, &st.psi).axpy(1.0, &solve(-eps));
        dd.axpy(-eps * eps, &phi11).sup_norm() / (eps * eps * phi11.sup_norm())
    };
    let (a, b) = (second(2e-2), second(1e-2));
    assert!(a < 1e-2 && b < a, "{a} {b}");
}

#[test]
fn energy_of_rest_is_zero() {
    let g = grid(32);
    let e = energy_from_vorticity(&Field2D::constant(&g, 0.0), 0.0).unwrap();
    assert_eq!((e.gradient_form, e.green_form), (0.0, 0.0));
}

#[test]
fn solved_states_satisfy_their_boundary_conditions() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    assert!(st.newton_residual < 1e-9);
    assert!((circulation(&st.psi, Boundary::Inner) - st.gamma).abs() < 1e-6 * st.gamma.abs());
    assert!(st.psi.ring_spread(0) < 1e-12);
    assert!(st.psi.ring(g.nr - 1).iter().all(|v| v.abs() < 1e-14));
    assert!((st.psi.ring_mean(0) - st.inner_value).abs() < 1e-14);

    // Quadratic convergence once in the asymptotic regime.
    let h = &st.newton_history;
    let tail: Vec<f64> = h.windows(2).filter(|w| w[0] < 1e-2 && w[1] > 1e-13).map(|w| w[1] / (w[0] * w[0])).collect();
    assert!(tail.iter().all(|&c| c < 1e3), "{h:?}");
}

#[test]
fn profile_outside_the_range_does_not_matter() {
    let g = grid(32);
    let st = reference_state(&g).unwrap();
    let (pmin, _) = st.psi_range();
    let (lo, hi) = (st.profile.lo(), st.profile.hi());
    let cut = 0.5 * (lo + pmin);
    let modified = Profile1D::from_fn(lo, hi, st.profile.len(), |s| {
        st.profile.eval(s) + if s < cut { 0.2 * (cut - s).powi(4) } else { 0.0 }
    });
    let other = solve_steady(&g, &modified, st.gamma, Some(&st.psi)).unwrap();
    assert!(max_diff(&other.psi, &st.psi) < 1e-12);
}
