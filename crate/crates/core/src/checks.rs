//! Invariant batteries run by the `check` command. Each check reports the
//! measured quantity next to its threshold so results can be tabulated.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::curve::{invert_monotone, Curve1D};
use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, make_annulus, poisson_bracket, AnnulusGrid, Field2D};
use crate::moser::check_nd2;
use crate::orbit::{pushforward, reconstruct_alpha, OrbitGeometry};
use crate::profile::{Profile1D, DEFAULT_PROFILE_SAMPLES};
use crate::reference::{radial_degenerate_shift, ray_area};
use crate::steady::{check_nd1, solve_steady_adapted, SteadyState};
use crate::tame::{extend, interp_check, smooth, verify_smoothing};

/// Circulation of the reference state. Smaller magnitudes bring the outer
/// wall close to a stagnation circle (`|∇ψ| → 0`), which degrades every
/// level-set computation.
pub const REFERENCE_GAMMA: f64 = -8.0 * PI;

pub const SUITES: [&str; 5] = ["coarea", "derivatives", "tame", "orbit", "nd"];

/// Solves for the reference profile `F(s) = s/2 − 1` with `REFERENCE_GAMMA`.
pub fn reference_state(grid: &Arc<AnnulusGrid>) -> Result<SteadyState> {
    solve_steady_adapted(grid, &|s| 0.5 * s - 1.0, Some(&|_| 0.5), REFERENCE_GAMMA, DEFAULT_PROFILE_SAMPLES)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CheckRow {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Passes when `value <= threshold` (NaN fails).
    pub fn at_most(suite: &str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { suite: suite.into(), name: name.into(), value, threshold, pass: value <= threshold }
    }

    /// Passes when `value > threshold`.
    pub fn above(suite: &str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { suite: suite.into(), name: name.into(), value, threshold, pass: value > threshold }
    }
}

/// CSV table `suite,name,value,threshold,pass`.
pub fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut s = String::from("suite,name,value,threshold,pass\n");
    for r in rows {
        s.push_str(&format!("{},{},{:e},{:e},{}\n", r.suite, r.name, r.value, r.threshold, r.pass));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub nr: usize,
    pub ns: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { nr: 48, ns: 96, r_inner: 1.0, r_outer: 2.0, seed: 7 }
    }
}

impl CheckConfig {
    fn grid(&self) -> Result<Arc<AnnulusGrid>> {
        make_annulus(self.r_inner, self.r_outer, self.nr, self.ns)
    }
}

pub fn run_suite(name: &str, cfg: &CheckConfig) -> Result<Vec<CheckRow>> {
    match name {
        "coarea" => coarea(cfg),
        "derivatives" => derivatives(cfg),
        "tame" => tame(cfg),
        "orbit" => orbit(cfg),
        "nd" => nd(cfg),
        other => Err(Error::InvalidConfig(format!("unknown suite '{other}'; expected one of {}", SUITES.join(", ")))),
    }
}

/// Boundary-vanishing weight `(r − ri)(ro − r)` normalized to peak 1.
fn bubble(r: f64, ri: f64, ro: f64) -> f64 {
    4.0 * (r - ri) * (ro - r) / ((ro - ri) * (ro - ri))
}

/// Test vorticities: radial `r²` and two angular perturbations that vanish
/// on the boundary, so every field is constant on each boundary circle.
type FieldFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

fn test_fields(g: &Arc<AnnulusGrid>) -> Vec<(String, FieldFn)> {
    let (ri, ro) = (g.r_inner, g.r_outer);
    vec![
        ("r^2".to_string(), Box::new(|r: f64, _t: f64| r * r)),
        (
            "r^2+sin".to_string(),
            Box::new(move |r: f64, t: f64| r * r + 0.05 * bubble(r, ri, ro) * r * t.sin()),
        ),
        (
            "r^2+cos2".to_string(),
            Box::new(move |r: f64, t: f64| r * r + 0.08 * bubble(r, ri, ro) * (2.0 * t).cos() + 0.03 * bubble(r, ri, ro)),
        ),
    ]
}

/// Random smooth field `1 + Σ a_m r^p cos(mθ + φ)` with small coefficients.
fn random_field(g: &Arc<AnnulusGrid>, rng: &mut StdRng) -> Field2D {
    let terms: Vec<(f64, i32, f64, f64)> = (0..3)
        .map(|m| (rng.gen_range(-0.3..0.3), m + 1, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0)))
        .collect();
    Field2D::from_fn(g, move |r, t| 1.0 + terms.iter().map(|&(a, m, ph, p)| a * r.powf(p) * (m as f64 * t + ph).cos()).sum::<f64>())
}

/// Random direction that is constant on each boundary circle.
fn random_direction(g: &Arc<AnnulusGrid>, rng: &mut StdRng) -> Field2D {
    let (ri, ro) = (g.r_inner, g.r_outer);
    let c0 = rng.gen_range(-1.0..1.0);
    let c1 = rng.gen_range(-1.0..1.0);
    let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field2D::from_fn(g, move |r, t| {
        let s = (r - ri) / (ro - ri);
        c0 + c1 * s + bubble(r, ri, ro) * (a[0] * t.cos() + a[1] * (2.0 * t).sin() + a[2] * r + a[3] * s * s)
    })
}

/// Random stream-function generator, constant on each boundary circle.
fn random_generator(g: &Arc<AnnulusGrid>, rng: &mut StdRng) -> Field2D {
    let (ri, ro) = (g.r_inner, g.r_outer);
    let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ph = rng.gen_range(0.0..2.0 * PI);
    Field2D::from_fn(g, move |r, t| {
        let b = bubble(r, ri, ro);
        b * b * (a[0] * (t + ph).cos() + a[1] * (2.0 * t).sin() + a[2] * r)
    })
}

/// [`random_generator`] drawn from a fresh generator seeded with `seed`.
pub fn seeded_generator(g: &Arc<AnnulusGrid>, seed: u64) -> Field2D {
    random_generator(g, &mut StdRng::seed_from_u64(seed))
}

/// Smooth window on `[a, b]`.
fn window(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let y = 2.0 * (x - a) / (b - a) - 1.0;
        if y.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - y * y)).exp()
        }
    }
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Largest `|a − b| / max|b|` over nodes whose abscissa lies outside the
/// `margin` fraction at either end.
fn rel_err_inner(a: &Curve1D, b: &Curve1D, margin: f64) -> f64 {
    let (lo, hi) = (b.lo, b.hi);
    let w = hi - lo;
    let mut scale = 0.0f64;
    let mut err = 0.0f64;
    for i in 0..b.len() {
        let x = b.node(i);
        if x < lo + margin * w || x > hi - margin * w {
            continue;
        }
        scale = scale.max(b.values[i].abs());
        err = err.max((a.eval(x) - b.values[i]).abs());
    }
    err / scale.max(1e-300)
}

fn coarea(cfg: &CheckConfig) -> Result<Vec<CheckRow>> {
    let s = "coarea";
    let g = cfg.grid()?;
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let radial = OrbitGeometry::new(&Field2D::from_fn(&g, |r, _| r * r), g.nr, 129)?;
    let dev = radial.dist.a_prime.values.iter().map(|v| (v - PI).abs()).fold(0.0, f64::max);
    rows.push(CheckRow::at_most(s, "radial J(1/|grad w|) = pi", dev, 1e-6));
    let fields = test_fields(&g);
    let mut count = 0;
    'outer: for (name, f) in &fields {
        let w = Field2D::from_fn(&g, f);
        let geo = OrbitGeometry::new(&w, g.nr, 129)?;
        let (a, b) = (geo.chart.omega_min, geo.chart.omega_max);
        let (gr, gt) = gradient(&w);
        let gn = gr.zip_map(&gt, f64::hypot);
        for k in 0..4 {
            if count == 10 {
                break 'outer;
            }
            let u = random_field(&g, &mut rng);
            let c = a + (b - a) * (0.2 + 0.15 * k as f64);
            let (wa, wb) = (c - 0.3 * (b - a), c + 0.3 * (b - a));
            let zeta = window(wa.max(a), wb.min(b));
            let lhs = integrate(&Field2D {
                grid: g.clone(),
                values: (0..g.len()).map(|i| u.values[i] * gn.values[i] * zeta(w.values[i])).collect(),
            });
            let j = geo.j(&u);
            let rhs = simpson(|l| zeta(l) * j.eval(l), a, b, 4000);
            rows.push(CheckRow::at_most(s, format!("coarea identity {name} #{k}"), (lhs - rhs).abs() / lhs.abs(), 1e-3));
            count += 1;
        }
    }
    Ok(rows)
}

fn derivatives(cfg: &CheckConfig) -> Result<Vec<CheckRow>> {
    let s = "derivatives";
    let g = cfg.grid()?;
    let mut rng = StdRng::seed_from_u64(cfg.seed + 1);
    let mut rows = Vec::new();
    let radial = OrbitGeometry::new(&Field2D::from_fn(&g, |r, _| r * r), g.nr, 129)?;
    let one = Field2D::constant(&g, 1.0);
    let dj = radial.dj_dlambda(&one);
    let exact = Curve1D::from_fn(dj.lo, dj.hi, dj.len(), |l| PI / l.sqrt());
    rows.push(CheckRow::at_most(s, "radial dJ/dlambda = pi/sqrt(lambda)", rel_err_inner(&dj, &exact, 0.05), 1e-4));
    for (name, f) in test_fields(&g).iter().skip(1) {
        let w = Field2D::from_fn(&g, f);
        let geo = OrbitGeometry::new(&w, g.nr, 129)?;
        let nu = random_direction(&g, &mut rng);
        let u = random_field(&g, &mut rng);
        let q = |eps: f64| -> Result<Curve1D> {
            Ok(OrbitGeometry::new(&w.axpy(eps, &nu), g.nr, 129)?.dist.ainv.curve)
        };
        let eps = 1e-3;
        let (qp, qm) = (q(eps)?, q(-eps)?);
        let fd = qp.sub(&qm).scale(0.5 / eps);
        let dq = geo.dq(&nu);
        rows.push(CheckRow::at_most(s, format!("dq vs central difference {name}"), fd.dist(&dq) / dq.sup_norm(), 1e-3));
        let e2 = 1e-2;
        let (qp, qm, q0) = (q(e2)?, q(-e2)?, geo.dist.ainv.curve.clone());
        let sd = qp.lincomb(1.0, &qm, 1.0).lincomb(1.0, &q0, -2.0).scale(1.0 / (e2 * e2));
        let d2 = geo.d2q(&nu, &nu);
        rows.push(CheckRow::at_most(s, format!("d2q vs second difference {name}"), sd.dist(&d2) / d2.sup_norm(), 1e-2));
        let nu2 = random_direction(&g, &mut rng);
        let sym = geo.d2q(&nu, &nu2).dist(&geo.d2q(&nu2, &nu));
        rows.push(CheckRow::at_most(s, format!("d2q symmetry {name}"), sym, 1e-8));
        // dJ/dλ: derivative of the interpolated J curve against the divergence form.
        let j = geo.j(&u);
        let jd = Curve1D::from_fn(j.lo, j.hi, j.len(), |l| j.deriv(l));
        rows.push(CheckRow::at_most(
            s,
            format!("dJ/dlambda identity {name}"),
            rel_err_inner(&jd, &geo.dj_dlambda(&u), 0.05),
            1e-3,
        ));
        // ∂_ε J at fixed λ, compared on the common level grid of the base chart.
        let jeps = |eps: f64| -> Result<Curve1D> { Ok(OrbitGeometry::new(&w.axpy(eps, &nu), g.nr, 129)?.j(&u)) };
        let (jp, jm) = (jeps(eps)?, jeps(-eps)?);
        let base = geo.dj_depsilon(&u, &nu);
        let fdj = Curve1D::from_fn(base.lo, base.hi, base.len(), |l| (jp.eval(l) - jm.eval(l)) * 0.5 / eps);
        rows.push(CheckRow::at_most(s, format!("dJ/depsilon identity {name}"), rel_err_inner(&fdj, &base, 0.05), 1e-3));
    }
    Ok(rows)
}

/// One-dimensional test battery on `[0, 1]`.
pub fn tame_battery() -> Vec<(&'static str, Curve1D)> {
    let n = 129;
    vec![
        ("sin+x", Curve1D::from_fn(0.0, 1.0, n, |x| (2.0 * PI * x).sin() + x)),
        ("exp", Curve1D::from_fn(0.0, 1.0, n, f64::exp)),
        ("runge", Curve1D::from_fn(0.0, 1.0, n, |x| 1.0 / (1.0 + 4.0 * x * x))),
        ("x^2 cos", Curve1D::from_fn(0.0, 1.0, n, |x| x * x * (3.0 * x).cos())),
        ("tanh", Curve1D::from_fn(0.0, 1.0, n, |x| (4.0 * x - 2.0).tanh())),
    ]
}

fn tame(cfg: &CheckConfig) -> Result<Vec<CheckRow>> {
    let s = "tame";
    let mut rows = Vec::new();
    let ts = [4.0, 8.0, 16.0, 32.0];
    for (name, f) in tame_battery() {
        let r = verify_smoothing(&f, 2, 0, &ts);
        rows.push(CheckRow::at_most(s, format!("smoothing gain (2,0) {name}"), r.gain, 100.0));
        rows.push(CheckRow::at_most(s, format!("smoothing approximation (2,0) {name}"), r.approximation, 100.0));
        for l in 0..3 {
            let r = verify_smoothing(&f, l, l, &ts);
            rows.push(CheckRow::at_most(s, format!("smoothing contraction ({l},{l}) {name}"), r.gain, 1.05));
        }
        for (m, i, l) in [(0, 1, 2), (0, 1, 3), (1, 2, 3), (0, 2, 4)] {
            rows.push(CheckRow::at_most(s, format!("interpolation ({m},{i},{l}) {name}"), interp_check(&f, i, m, l)?, 50.0));
        }
        let s2 = smooth(&smooth(&f, 32.0), 4.0);
        let s1 = smooth(&f, 4.0);
        rows.push(CheckRow::at_most(
            s,
            format!("semigroup S(4)S(32) ~ S(4) {name}"),
            s2.dist(&s1) / s1.sup_norm(),
            0.1,
        ));
        let arc = Curve1D::from_fn(0.0, 1.0, 129, |x| (x * 5.0).sin());
        let lhs = extend(&f.lincomb(2.0, &arc, -0.5), 0.25);
        let rhs = extend(&f, 0.25).lincomb(2.0, &extend(&arc, 0.25), -0.5);
        rows.push(CheckRow::at_most(s, format!("extension linearity {name}"), lhs.dist(&rhs), 1e-12));
    }
    let g = cfg.grid()?;
    let fld = Field2D::from_fn(&g, |r, t| r * r + 0.1 * r * t.sin());
    rows.push(CheckRow::at_most(s, "interpolation (0,1,2) field", interp_check(&fld, 1, 0, 2)?, 50.0));
    let inc = Curve1D::from_fn(0.0, 1.0, 129, |x| x + 0.3 * x * x + 0.05 * (6.0 * x).sin());
    let back = invert_monotone(&invert_monotone(&inc)?)?;
    rows.push(CheckRow::at_most(s, "inversion involutive", back.dist(&inc), 1e-7));
    Ok(rows)
}

fn orbit(cfg: &CheckConfig) -> Result<Vec<CheckRow>> {
    let s = "orbit";
    let g = cfg.grid()?;
    let h2 = g.hr * g.hr;
    let mut rng = StdRng::seed_from_u64(cfg.seed + 2);
    let mut rows = Vec::new();
    let fields = test_fields(&g);
    let (name, f) = &fields[1];
    let w = Field2D::from_fn(&g, f);
    let geo = OrbitGeometry::new(&w, g.nr, 129)?;
    let (a, b) = (geo.chart.omega_min, geo.chart.omega_max);
    let quantiles: Vec<f64> = (1..10).map(|q| a + (b - a) * q as f64 / 10.0).collect();
    let worst = quantiles
        .iter()
        .map(|&l| {
            let exact = ray_area(&|r, t| f(r, t), g.r_inner, g.r_outer, l, 512);
            (geo.dist.a.eval(l) - exact).abs()
        })
        .fold(0.0, f64::max);
    rows.push(CheckRow::at_most(s, format!("A vs ray-area oracle {name}"), worst, 2.0 * h2));
    for k in 0..3 {
        let alpha = random_generator(&g, &mut rng);
        let moved = pushforward(&w, &alpha, 0.05)?;
        let gm = OrbitGeometry::new(&moved, g.nr, 129)?;
        let worst = quantiles
            .iter()
            .map(|&l| (gm.dist.a.eval(l) - geo.dist.a.eval(l)).abs())
            .fold(0.0, f64::max);
        rows.push(CheckRow::at_most(s, format!("A invariant under flow #{k}"), worst, 3.0 * h2));
        let nu = poisson_bracket(&w, &alpha);
        let scale = nu.sup_norm() * geo.area();
        rows.push(CheckRow::at_most(s, format!("tangency of {{w,alpha}} #{k}"), geo.tangency_defect(&nu).sup_norm() / scale, 1e-5));
        let rec = reconstruct_alpha(&geo, &nu)?;
        let res = poisson_bracket(&w, &rec).sub(&nu).sup_norm() / nu.sup_norm();
        rows.push(CheckRow::at_most(s, format!("reconstruct alpha residual #{k}"), res, 1e-3));
    }
    Ok(rows)
}

fn nd(cfg: &CheckConfig) -> Result<Vec<CheckRow>> {
    let s = "nd";
    let g = cfg.grid()?;
    let mut rows = Vec::new();
    let st = reference_state(&g)?;
    let r1 = check_nd1(&st);
    rows.push(CheckRow::above(s, "ND1 reference sigma_rel", r1.relative, r1.threshold));
    let r2 = check_nd2(&st)?;
    rows.push(CheckRow::above(s, "ND2 reference sigma_rel", r2.relative, r2.threshold));
    let harmonic = SteadyState::from_parts(Profile1D::zeros(-1.0, 1.0, 65), Field2D::zeros(&g), 0.0);
    let rh = check_nd1(&harmonic);
    rows.push(CheckRow::above(s, "ND1 harmonic sigma_rel", rh.relative, rh.threshold));
    let c = radial_degenerate_shift(&g);
    let tuned = SteadyState::from_parts(Profile1D::from_fn(-1.0, 1.0, 65, |x| -c * x), Field2D::zeros(&g), 0.0);
    let rt = check_nd1(&tuned);
    rows.push(CheckRow::at_most(s, "ND1 tuned degenerate sigma_rel", rt.relative, rt.threshold));
    Ok(rows)
}
