use std::f64::consts::PI;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use steady_orbits::checks::{reference_state, REFERENCE_GAMMA};
use steady_orbits::curve::Curve1D;
use steady_orbits::grid::{make_annulus, AnnulusGrid};
use steady_orbits::moser::{
    dt, dt_parts, k_apply, moser_solve, right_inverse, t_map, t_of_state, uniqueness_probe, vb, vm, Verdict,
};
use steady_orbits::reference::{radial_linear, radial_steady};
use steady_orbits::steady::solve_steady;
use steady_orbits::{MoserConfig, Profile1D, SteadyState};

fn grid(nr: usize) -> Arc<AnnulusGrid> {
    make_annulus(1.0, 2.0, nr, 2 * nr).unwrap()
}

fn mu_curve(st: &SteadyState, f: impl Fn(f64) -> f64) -> Curve1D {
    let geo = st.psi_geometry().unwrap();
    Curve1D::from_fn(0.0, geo.area(), geo.mu_nodes().len(), |m| f(m / geo.area()))
}

fn direction(st: &SteadyState) -> Profile1D {
    let (lo, hi) = (st.profile.lo(), st.profile.hi());
    Profile1D::from_fn_with_derivative(lo, hi, st.profile.len(), |s| 0.3 + 0.2 * s + 0.05 * s * s, |s| 0.2 + 0.1 * s)
}

#[test]
fn t_map_boundary_values_and_paths() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let tv = t_map(&g, &st.profile, REFERENCE_GAMMA, Some(&st.psi)).unwrap();
    let t = &tv.t;
    assert!((t.y_hi() - (-1.0)).abs() < 1e-6, "{}", t.y_hi());
    let oracle = radial_steady(&|s| 0.5 * s - 1.0, 1.0, 2.0, REFERENCE_GAMMA, 8000).unwrap();
    let expect = 0.5 * oracle.min() - 1.0;
    assert!((t.y_lo() - expect).abs() < 1e-4, "{} vs {expect}", t.y_lo());
    assert!(tv.paths_agree, "{}", tv.path_mismatch);
}

#[test]
fn dt_matches_central_difference_and_radial_oracle() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let f = direction(&st);
    let d = dt(&st, &f).unwrap();
    let zero = Profile1D::zeros(st.profile.lo(), st.profile.hi(), 65);
    assert!(dt(&st, &zero).unwrap().sup_norm() == 0.0);

    let eps = 1e-3;
    let t = |e: f64| t_map(&g, &st.profile.lincomb(1.0, &f, e), REFERENCE_GAMMA, Some(&st.psi)).unwrap().t.curve;
    let fd = t(eps).sub(&t(-eps)).scale(0.5 / eps);
    assert!(fd.dist(&d) / d.sup_norm() < 1e-3);

    // Radial reduction: ψ and φ = DS(F)f from 1D solves, sublevel sets are discs.
    let psi = radial_steady(&|s| 0.5 * s - 1.0, 1.0, 2.0, REFERENCE_GAMMA, 8000).unwrap();
    let fs = |s: f64| 0.3 + 0.2 * s + 0.05 * s * s;
    let phi = radial_linear(&|_| 0.5, &|r| fs(psi.eval(r)), 1.0, 2.0, 8000);
    let worst = (0..d.len())
        .map(|i| {
            let rho = (1.0 + d.node(i) / PI).sqrt();
            let lam = psi.eval(rho);
            (d.values[i] - (fs(lam) + 0.5 * phi.eval(rho))).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn vb_is_a_right_inverse_of_composition() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let (pmin, pmax) = st.psi_range();
    let one = mu_curve(&st, |_| 1.0);
    let f = vb(&st, &one).unwrap();
    for i in 0..=100 {
        let s = pmin + (pmax - pmin) * i as f64 / 100.0;
        assert!((f.eval(s) - 1.0).abs() < 1e-10);
    }
    let b = dt_parts(&st, &f).unwrap().0;
    assert!(b.dist(&one) < 1e-10);

    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = mu_curve(&st, |x| c.iter().enumerate().map(|(k, ck)| ck * (PI * k as f64 * x).cos()).sum());
        let b = dt_parts(&st, &vb(&st, &g).unwrap()).unwrap().0;
        assert!(b.dist(&g) < 1e-7, "{}", b.dist(&g));
    }
}

#[test]
fn vb_of_the_identity_is_the_distribution_function() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let geo = st.psi_geometry().unwrap();
    let (pmin, pmax) = st.psi_range();
    let ident = mu_curve(&st, |x| x * geo.area());
    let f = vb(&st, &ident).unwrap();
    let worst = (0..ident.len())
        .map(|i| (f.eval(geo.dist.ainv.eval(ident.node(i))) - ident.values[i]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
    let mid = 0.5 * (pmin + pmax);
    assert!((f.eval(mid) - geo.dist.a.eval(mid)).abs() < 1e-6);
    assert!(dt_parts(&st, &f).unwrap().0.dist(&ident) < 1e-8);
}

#[test]
fn k_consistency_and_elliptic_gain() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let zero = mu_curve(&st, |_| 0.0);
    assert_eq!(k_apply(&st, &zero).unwrap().sup_norm(), 0.0);
    let gcurve = mu_curve(&st, |x| (-3.0 * (x - 0.4).powi(2)).exp());
    let lhs = dt(&st, &vb(&st, &gcurve).unwrap()).unwrap().sub(&gcurve);
    assert!(lhs.dist(&k_apply(&st, &gcurve).unwrap()) < 1e-6);
    let norms: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&k| k_apply(&st, &mu_curve(&st, |x| (PI * k * x).cos())).unwrap().sup_norm())
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}

#[test]
fn vm_and_right_inverse() {
    let g = grid(48);
    let st = reference_state(&g).unwrap();
    let zero = mu_curve(&st, |_| 0.0);
    assert_eq!(vm(&st, &zero).unwrap().sup_norm(), 0.0);
    assert_eq!(right_inverse(&st, &zero).unwrap().curve.sup_norm(), 0.0);

    let gstar = mu_curve(&st, |x| x.sin() + 0.2 * (7.0 * x).cos());
    let h = gstar.add(&k_apply(&st, &gstar).unwrap());
    assert!(vm(&st, &h).unwrap().dist(&gstar) < 1e-7);

    let h1 = mu_curve(&st, |x| (3.0 * x).cos());
    let h2 = mu_curve(&st, |x| x * x - 0.5);
    let back = dt(&st, &right_inverse(&st, &h1).unwrap()).unwrap();
    assert!(back.dist(&h1) / h1.sup_norm() < 1e-6);
    let combo = right_inverse(&st, &h1.lincomb(2.0, &h2, -0.7)).unwrap();
    let parts = right_inverse(&st, &h1).unwrap().lincomb(2.0, &right_inverse(&st, &h2).unwrap(), -0.7);
    assert!(combo.curve.dist(&parts.curve) < 1e-10);
}

#[test]
fn moser_trivial_and_infeasible_targets() {
    let g = grid(32);
    let st = reference_state(&g).unwrap();
    let cfg = MoserConfig::default();
    let own = t_of_state(&st).unwrap();
    let out = moser_solve(&g, &st.profile, st.gamma, &own.curve, &cfg).unwrap();
    assert!(out.trace.converged);
    assert_eq!(out.trace.rows.len(), 1);
    assert_eq!(out.profile, st.profile);

    let falling = own.curve.scale(-1.0);
    let err = moser_solve(&g, &st.profile, st.gamma, &falling, &cfg).unwrap_err();
    assert_eq!(err.error.code(), "diverged");

    let bad = MoserConfig { kappa: 2.5, ..cfg };
    let err = moser_solve(&g, &st.profile, st.gamma, &own.curve, &bad).unwrap_err();
    assert_eq!(err.error.code(), "invalid-config");
}

#[test]
fn uniqueness_probe_examples() {
    let g = grid(32);
    let a = reference_state(&g).unwrap();
    let same = uniqueness_probe(&a, &a, 1e-8, 1.0).unwrap();
    assert_eq!(same.verdict, Verdict::SameOrbitSameState);
    assert_eq!((same.q_distance, same.psi_distance), (0.0, 0.0));

    // Changing F only below min ψ changes neither the state nor its orbit.
    let (pmin, _) = a.psi_range();
    let (lo, hi) = (a.profile.lo(), a.profile.hi());
    let cut = 0.5 * (lo + pmin);
    let fb = Profile1D::from_fn(lo, hi, a.profile.len(), |s| {
        let base = a.profile.eval(s);
        if s < cut {
            base + 0.1 * (cut - s).powi(4)
        } else {
            base
        }
    });
    let b = solve_steady(&g, &fb, a.gamma, Some(&a.psi)).unwrap();
    let r = uniqueness_probe(&a, &b, 1e-8, 1.0).unwrap();
    assert!(r.q_distance < 1e-10 && r.psi_distance < 1e-10, "{r:?}");

    let other = solve_steady(&g, &a.profile.scale(1.1), a.gamma, Some(&a.psi)).unwrap();
    assert_eq!(uniqueness_probe(&a, &other, 1e-8, 1.0).unwrap().verdict, Verdict::DifferentOrbit);
}
