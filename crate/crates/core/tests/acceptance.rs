//! End-to-end acceptance battery. Prints one PASS/FAIL line per criterion
//! with the measured quantities and exits non-zero if any criterion fails.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use steady_orbits::checks::{reference_state, run_suite, seeded_generator, tame_battery, CheckConfig, REFERENCE_GAMMA};
use steady_orbits::curve::Curve1D;
use steady_orbits::grid::{make_annulus, AnnulusGrid, Field2D};
use steady_orbits::moser::{check_nd2, dt, id_plus_k, k_apply, moser_solve, right_inverse, t_map, vb};
use steady_orbits::orbit::{pushforward, second_variation};
use steady_orbits::profile::DEFAULT_PROFILE_SAMPLES;
use steady_orbits::reference::{radial_degenerate_shift, radial_steady, ray_area};
use steady_orbits::steady::{check_nd1, energy, energy_from_vorticity, solve_steady, solve_steady_adapted};
use steady_orbits::tame::{interp_check, verify_smoothing};
use steady_orbits::{MoserConfig, OrbitGeometry, Profile1D, Result, SteadyState};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn grid(nr: usize, ns: usize) -> Arc<AnnulusGrid> {
    make_annulus(1.0, 2.0, nr, ns).unwrap()
}

fn harmonic(g: &Arc<AnnulusGrid>) -> Result<SteadyState> {
    solve_steady(g, &Profile1D::zeros(-2.0, 0.0, 65), -2.0 * PI, None)
}

fn linear_state(g: &Arc<AnnulusGrid>, a: f64, b: f64, gamma: f64) -> Result<SteadyState> {
    solve_steady_adapted(g, &|s| a * s + b, Some(&|_| a), gamma, DEFAULT_PROFILE_SAMPLES)
}

/// Compactly supported bump of height 1 centred at `s = −1.07`.
fn bump(s: f64) -> f64 {
    let x = (s + 1.07) / 0.8;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp() * std::f64::consts::E
    }
}

fn suite_rows(name: &str, cfg: &CheckConfig, filter: impl Fn(&str) -> bool) -> Result<(bool, usize, String)> {
    let rows: Vec<_> = run_suite(name, cfg)?.into_iter().filter(|r| filter(&r.name)).collect();
    let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{} = {:.3e}", r.name, r.value)).collect();
    let worst = rows
        .iter()
        .map(|r| (r.value / r.threshold, r))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, r)| format!("tightest: {} = {:.3e} (limit {:.1e})", r.name, r.value, r.threshold))
        .unwrap_or_default();
    let detail = if failed.is_empty() { worst } else { format!("failed: {}", failed.join("; ")) };
    Ok((failed.is_empty(), rows.len(), detail))
}

fn closed_form_elliptic() -> Result<Verdict> {
    let mut errs = Vec::new();
    let mut ok = true;
    for nr in [32, 64, 128] {
        let g = grid(nr, 2 * nr);
        let st = harmonic(&g)?;
        let exact = Field2D::from_fn(&g, |r, _| (r / 2.0).ln());
        let e = st.psi.sub(&exact).sup_norm();
        ok &= e <= 10.0 * g.hr * g.hr;
        errs.push((g.hr, e));
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect();
    ok &= orders.iter().all(|&p| p >= 1.9);
    verdict(
        ok,
        format!(
            "sup errors {:.2e}, {:.2e}, {:.2e} (10h^2 at Nr=32: {:.2e}); orders {:.2}, {:.2}",
            errs[0].1,
            errs[1].1,
            errs[2].1,
            10.0 * errs[0].0 * errs[0].0,
            orders[0],
            orders[1]
        ),
    )
}

fn radial_oracle() -> Result<Verdict> {
    let g = grid(128, 256);
    let gamma = -2.0 * PI;
    let mut errs = Vec::new();
    for (a, b) in [(0.5, -1.0), (1.0, 0.0)] {
        let st = linear_state(&g, a, b, gamma)?;
        let oracle = radial_steady(&|s| a * s + b, 1.0, 2.0, gamma, 8000)?;
        let exact = Field2D::from_fn(&g, |r, _| oracle.eval(r));
        errs.push(st.psi.sub(&exact).sup_norm());
    }
    verdict(
        errs.iter().all(|&e| e <= 1e-4),
        format!("sup |psi - radial BVP|: F=0.5s-1 {:.2e}, F=s {:.2e} (limit 1e-4)", errs[0], errs[1]),
    )
}

fn energy_closed_form() -> Result<Verdict> {
    let g = grid(64, 128);
    let h2 = g.hr * g.hr;
    let e = energy(&harmonic(&g)?).value();
    let harm = (e - PI * LN_2).abs();
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let a = rng.gen_range(0.2..1.0);
        let b = rng.gen_range(-1.5..-0.5);
        let gamma = rng.gen_range(-10.0 * PI..-6.0 * PI);
        let en = energy(&linear_state(&g, a, b, gamma)?);
        worst = worst.max(en.discrepancy() / en.value().abs());
    }
    verdict(
        harm <= 1e-3 && worst <= h2,
        format!("harmonic energy {e:.6} vs pi ln 2 (err {harm:.2e}); worst relative formula gap {worst:.2e} (h^2 = {h2:.2e})"),
    )
}

fn coarea_battery(cfg: &CheckConfig) -> Result<Verdict> {
    let (ok, n, detail) = suite_rows("coarea", cfg, |_| true)?;
    verdict(ok, format!("{n} checks; {detail}"))
}

fn distribution_closed_form() -> Result<Verdict> {
    let g = grid(48, 96);
    let h2 = g.hr * g.hr;
    let radial = OrbitGeometry::new(&Field2D::from_fn(&g, |r, _| r * r), g.nr, 129)?;
    let ainv = &radial.dist.ainv;
    let affine = (0..=300)
        .map(|i| 3.0 * PI * i as f64 / 300.0)
        .map(|m| (ainv.eval(m) - (1.0 + m / PI)).abs())
        .fold(0.0, f64::max);
    let (ri, ro) = (g.r_inner, g.r_outer);
    let b = move |r: f64| 4.0 * (r - ri) * (ro - r);
    let f = move |r: f64, t: f64| r * r + 0.05 * b(r) * r * t.sin();
    let w = Field2D::from_fn(&g, f);
    let geo = OrbitGeometry::new(&w, g.nr, 129)?;
    let (lo, hi) = (geo.chart.omega_min, geo.chart.omega_max);
    let worst = (1..10)
        .map(|q| lo + (hi - lo) * q as f64 / 10.0)
        .map(|l| (geo.dist.a.eval(l) - ray_area(&f, ri, ro, l, 1024)).abs())
        .fold(0.0, f64::max);
    verdict(
        affine <= 1e-5 && worst <= 2.0 * h2,
        format!("radial |A^-1 - (1 + mu/pi)| {affine:.2e} (limit 1e-5); nonradial |A - oracle| {worst:.2e} (2h^2 = {:.2e})", 2.0 * h2),
    )
}

fn derivative_identities(cfg: &CheckConfig) -> Result<Verdict> {
    let (ok, n, detail) = suite_rows("derivatives", cfg, |_| true)?;
    verdict(ok, format!("{n} checks; {detail}"))
}

fn orbit_invariance(cfg: &CheckConfig) -> Result<Verdict> {
    let (ok, n, detail) = suite_rows("orbit", cfg, |name| !name.starts_with("A vs ray"))?;
    verdict(ok, format!("{n} checks; {detail}"))
}

fn second_variation_check() -> Result<Verdict> {
    let g = grid(48, 96);
    let st = reference_state(&g)?;
    let e = |omega: &Field2D| -> Result<f64> { Ok(energy_from_vorticity(omega, st.gamma)?.value()) };
    let e0 = e(&st.omega)?;
    let mut worst = 0.0f64;
    let mut all_positive = true;
    let mut values = Vec::new();
    for seed in [3, 4, 5] {
        let alpha = seeded_generator(&g, seed);
        let exact = second_variation(&st, &alpha)?;
        let d = |eps: f64| -> Result<f64> {
            let p = e(&pushforward(&st.omega, &alpha, eps)?)?;
            let m = e(&pushforward(&st.omega, &alpha, -eps)?)?;
            Ok((p - 2.0 * e0 + m) / (eps * eps))
        };
        let eps = 0.04;
        let rich = (4.0 * d(eps / 2.0)? - d(eps)?) / 3.0;
        worst = worst.max((rich - exact).abs() / exact.abs());
        all_positive &= exact >= 0.0;
        values.push(exact);
    }
    verdict(
        worst <= 1e-2 && all_positive,
        format!(
            "second variation {:.4e}, {:.4e}, {:.4e}; worst relative gap to Richardson second difference {worst:.2e} (limit 1e-2)",
            values[0], values[1], values[2]
        ),
    )
}

fn mu_battery(lo: f64, hi: f64) -> Vec<Curve1D> {
    let n = 129;
    let x = move |m: f64| (m - lo) / (hi - lo);
    vec![
        Curve1D::from_fn(lo, hi, n, |_| 1.0),
        Curve1D::from_fn(lo, hi, n, x),
        Curve1D::from_fn(lo, hi, n, move |m| (3.0 * x(m)).sin()),
        Curve1D::from_fn(lo, hi, n, move |m| (x(m) - 0.3).powi(2) - 0.2),
        Curve1D::from_fn(lo, hi, n, move |m| (-4.0 * (x(m) - 0.6).powi(2)).exp()),
    ]
}

fn operator_identities() -> Result<Verdict> {
    let g = grid(64, 128);
    let st = reference_state(&g)?;
    let ipk = id_plus_k(&st)?;
    let geo = st.psi_geometry()?;
    let mu = geo.dist.ainv.curve.clone();
    let mut m_gap = 0.0f64;
    let mut inv_gap = 0.0f64;
    for h in mu_battery(mu.lo, mu.hi) {
        let h = Curve1D::new(mu.lo, mu.hi, mu.nodes().iter().map(|&m| h.eval(m)).collect());
        let lhs = dt(&st, &vb(&st, &h)?)?;
        let rhs = h.add(&k_apply(&st, &h)?);
        let mat = nalgebra::DVector::from_vec(h.values.clone());
        let col = &ipk.matrix * mat;
        let scale = h.sup_norm().max(rhs.sup_norm());
        m_gap = m_gap.max(lhs.dist(&rhs) / scale);
        m_gap = m_gap.max(col.iter().zip(&rhs.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
        let back = dt(&st, &right_inverse(&st, &h)?)?;
        inv_gap = inv_gap.max(back.dist(&h) / h.sup_norm());
    }
    verdict(
        m_gap <= 1e-6 && inv_gap <= 1e-6,
        format!("DT.VB vs Id+K {m_gap:.2e}; DT.L vs Id {inv_gap:.2e} (limits 1e-6)"),
    )
}

fn round_trip() -> Result<Verdict> {
    let g = grid(64, 128);
    let h2 = g.hr * g.hr;
    let st = reference_state(&g)?;
    let (lo, hi) = (st.profile.lo(), st.profile.hi());
    let fstar = Profile1D::from_fn(lo, hi, DEFAULT_PROFILE_SAMPLES, |s| 0.5 * s - 1.0 + 0.02 * bump(s));
    let target = t_map(&g, &fstar, st.gamma, Some(&st.psi))?;
    let cfg = MoserConfig::default();
    let out = moser_solve(&g, &st.profile, st.gamma, &target.t.curve, &cfg)?;
    let psi_err = out.state.psi.sub(&target.state.psi).sup_norm();
    // Floor: the discretization mismatch between the two ways of computing T.
    let floor = out.trace.rows.iter().map(|r| r.path_mismatch).fold(0.0, f64::max) * target.t.curve.sup_norm();
    let res = out.trace.residuals();
    let ratios: Vec<f64> = res
        .windows(2)
        .take_while(|w| w[0] > 10.0 * floor)
        .map(|w| w[1].ln() / w[0].ln())
        .collect();
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let repairs = out.trace.repairs();
    let ok = out.trace.converged && psi_err <= 5.0 * h2 && min_ratio >= 1.3 && repairs <= 2;
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    verdict(
        ok,
        format!(
            "converged {} in {} updates; psi error {psi_err:.2e} (5h^2 = {:.2e}); log-ratios above 10x floor {floor:.1e}: [{}] (need >= 1.3); repairs {repairs}",
            out.trace.converged,
            res.len() - 1,
            5.0 * h2,
            shown.join(", ")
        ),
    )
}

fn uniqueness() -> Result<Verdict> {
    let g = grid(48, 96);
    let h2 = g.hr * g.hr;
    let st = reference_state(&g)?;
    let (lo, hi) = (st.profile.lo(), st.profile.hi());
    let fstar = Profile1D::from_fn(lo, hi, DEFAULT_PROFILE_SAMPLES, |s| 0.5 * s - 1.0 + 0.02 * bump(s));
    let target = t_map(&g, &fstar, st.gamma, Some(&st.psi))?;
    let cfg = MoserConfig::default();
    let start_b = Profile1D::from_fn_with_derivative(lo, hi, DEFAULT_PROFILE_SAMPLES, |s| 0.53 * s - 0.99, |_| 0.53);
    let a = moser_solve(&g, &st.profile, st.gamma, &target.t.curve, &cfg)?;
    let b = moser_solve(&g, &start_b, st.gamma, &target.t.curve, &cfg)?;
    let psi_gap = a.state.psi.sub(&b.state.psi).sup_norm();
    let (pmin, pmax) = a.state.psi_range();
    let f_gap = a.profile.dist_on(&b.profile, pmin, pmax);
    let ok = a.trace.converged && b.trace.converged && psi_gap <= 5.0 * h2 && f_gap <= 5.0 * h2;
    verdict(
        ok,
        format!(
            "both converged {}; psi gap {psi_gap:.2e}, F gap on range {f_gap:.2e} (5h^2 = {:.2e})",
            a.trace.converged && b.trace.converged,
            5.0 * h2
        ),
    )
}

fn nondegeneracy() -> Result<Verdict> {
    let g = grid(48, 96);
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b, gamma) in [(0.5, -1.0, REFERENCE_GAMMA), (1.0, -1.0, REFERENCE_GAMMA), (0.3, -0.5, -10.0 * PI)] {
        let st = linear_state(&g, a, b, gamma)?;
        let n1 = check_nd1(&st);
        let n2 = check_nd2(&st)?;
        ok &= n1.nondegenerate && n2.nondegenerate;
        parts.push(format!("F={a}s{b:+}: ND1 {:.1e} ND2 {:.1e}", n1.relative, n2.relative));
    }
    let c = radial_degenerate_shift(&g);
    let tuned = SteadyState::from_parts(Profile1D::from_fn(-1.0, 1.0, 65, |x| -c * x), Field2D::zeros(&g), 0.0);
    let t = check_nd1(&tuned);
    ok &= !t.nondegenerate;
    parts.push(format!("tuned c = {c:.4}: ND1 {:.1e} flagged {}", t.relative, !t.nondegenerate));
    verdict(ok, parts.join("; "))
}

fn tame_battery_check() -> Result<Verdict> {
    let ts = [4.0, 8.0, 16.0, 32.0];
    let mut smooth_worst = 0.0f64;
    let mut interp_worst = 0.0f64;
    for (_, f) in tame_battery() {
        let r = verify_smoothing(&f, 2, 0, &ts);
        smooth_worst = smooth_worst.max(r.gain).max(r.approximation);
        for (m, i, l) in [(0, 1, 2), (0, 1, 3), (1, 2, 3), (0, 2, 4), (1, 3, 5)] {
            interp_worst = interp_worst.max(interp_check(&f, i, m, l)?);
        }
    }
    verdict(
        smooth_worst < 100.0 && interp_worst < 50.0,
        format!("worst smoothing ratio {smooth_worst:.3} (< 100); worst interpolation ratio {interp_worst:.3} (< 50)"),
    )
}

fn main() -> ExitCode {
    let cfg = CheckConfig::default();
    type Criterion = Box<dyn Fn() -> Result<Verdict>>;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("closed-form elliptic solve and convergence order", Box::new(closed_form_elliptic)),
        ("radial oracle equivalence", Box::new(radial_oracle)),
        ("energy closed form and formula agreement", Box::new(energy_closed_form)),
        ("coarea battery", Box::new(move || coarea_battery(&cfg))),
        ("distribution function closed form and area oracle", Box::new(distribution_closed_form)),
        ("derivative identities", Box::new(move || derivative_identities(&cfg))),
        ("orbit invariance, tangency and reconstruction", Box::new(move || orbit_invariance(&cfg))),
        ("second variation", Box::new(second_variation_check)),
        ("operator identities", Box::new(operator_identities)),
        ("profile recovery round trip", Box::new(round_trip)),
        ("uniqueness probe", Box::new(uniqueness)),
        ("non-degeneracy", Box::new(nondegeneracy)),
        ("tame and interpolation battery", Box::new(tame_battery_check)),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict { pass: false, detail: format!("error [{}]: {e}", e.code()) });
        failures += usize::from(!v.pass);
        println!(
            "{} {:>2} {name} ({:.1} s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
