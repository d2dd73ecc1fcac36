//! Command-line front end: solve steady states, tabulate distribution
//! functions, invert a target distribution, and run the invariant batteries.
//!
//! Exit codes: 0 success, 1 a check suite ran but some check failed,
//! 2 input or solver error, 3 the inversion did not converge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use steady_orbits::checks::{rows_to_csv, run_suite, seeded_generator, CheckConfig, REFERENCE_GAMMA};
use steady_orbits::expr::Expr;
use steady_orbits::grid::{make_annulus, poisson_bracket};
use steady_orbits::io::{curve_from_csv, curve_to_csv, FieldFile, StateBundle};
use steady_orbits::moser::{moser_solve, path_mismatch, t_of_state};
use steady_orbits::orbit::reconstruct_alpha;
use steady_orbits::profile::DEFAULT_PROFILE_SAMPLES;
use steady_orbits::steady::{energy, solve_steady, solve_steady_adapted};
use steady_orbits::{AnnulusGrid, Error, MoserConfig, OrbitGeometry, Profile1D, SteadyState};

#[derive(Parser)]
#[command(name = "steady-orbits", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve Δψ = F(ψ) with circulation γ; writes state.json and diagnostics.json.
    Solve {
        #[command(flatten)]
        geo: GridArgs,
        /// Profile F: a CSV file `s,F` or an expression in `s`.
        #[arg(long)]
        profile: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Distribution function of a state's vorticity; writes ainv.csv, area.csv, dist.json.
    Dist {
        #[arg(long)]
        state: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recover a profile whose distribution function matches a target CSV `mu,lambda`.
    Invert {
        #[command(flatten)]
        geo: GridArgs,
        /// Starting profile, as for `solve`.
        #[arg(long, default_value = "0.5*s-1")]
        profile: String,
        #[arg(long)]
        target: PathBuf,
        /// Moser parameters as `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run one invariant battery; writes check_<suite>.csv.
    Check {
        #[arg(long)]
        suite: String,
        /// Grid `Nr,Ns` for the battery.
        #[arg(long, default_value = "48,96")]
        grid: String,
        #[arg(long, default_value_t = 1.0)]
        ri: f64,
        #[arg(long, default_value_t = 2.0)]
        ro: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Tangency defect of ν and the generator α with {ω, α} = ν; writes tangent.json, alpha.json.
    Tangent {
        #[arg(long)]
        state: PathBuf,
        /// Field file for ν; by default ν = {ω, α₀} for a seeded random α₀.
        #[arg(long)]
        nu: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Grid `Nr,Ns`.
    #[arg(long, default_value = "64,128")]
    grid: String,
    #[arg(long, default_value_t = 1.0)]
    ri: f64,
    #[arg(long, default_value_t = 2.0)]
    ro: f64,
    /// Circulation around the inner circle.
    #[arg(long, default_value_t = REFERENCE_GAMMA, allow_negative_numbers = true)]
    gamma: f64,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

enum Failure {
    Error(Error),
    ChecksFailed,
    NotConverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.cmd {
        Command::Solve { out, .. }
        | Command::Dist { out, .. }
        | Command::Invert { out, .. }
        | Command::Check { out, .. }
        | Command::Tangent { out, .. } => out.out.clone(),
    };
    let result = fs::create_dir_all(&out).map_err(Error::from).map_err(Failure::from).and_then(|_| run(cli.cmd, &out));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ChecksFailed) => ExitCode::from(1),
        Err(Failure::NotConverged) => ExitCode::from(3),
        Err(Failure::Error(e)) => {
            let body = json!({ "error": e.code(), "message": e.to_string() });
            let text = serde_json::to_string_pretty(&body).unwrap();
            let _ = fs::write(out.join("error.json"), format!("{text}\n"));
            eprintln!("{text}");
            ExitCode::from(if matches!(e, Error::Diverged { .. }) { 3 } else { 2 })
        }
    }
}

fn run(cmd: Command, out: &Path) -> CmdResult {
    match cmd {
        Command::Solve { geo, profile, .. } => solve(&geo, &profile, out),
        Command::Dist { state, .. } => dist(&state, out),
        Command::Invert { geo, profile, target, config, .. } => invert(&geo, &profile, &target, config.as_deref(), out),
        Command::Check { suite, grid, ri, ro, seed, .. } => {
            let (nr, ns) = parse_grid(&grid)?;
            check(&suite, &CheckConfig { nr, ns, r_inner: ri, r_outer: ro, seed }, out)
        }
        Command::Tangent { state, nu, seed, .. } => tangent(&state, nu.as_deref(), seed, out),
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::InvalidConfig(format!("grid '{s}' must be Nr,Ns"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn build_grid(geo: &GridArgs) -> Result<Arc<AnnulusGrid>, Error> {
    let (nr, ns) = parse_grid(&geo.grid)?;
    make_annulus(geo.ri, geo.ro, nr, ns)
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    fs::write(dir.join(name), text).map_err(|e| Error::Io(format!("{name}: {e}")))
}

fn write_json(dir: &Path, name: &str, v: &serde_json::Value) -> Result<(), Error> {
    write(dir, name, &(serde_json::to_string_pretty(v).unwrap() + "\n"))
}

fn load_state(path: &Path) -> Result<SteadyState, Error> {
    StateBundle::from_json(&read(path)?)?.into_state()
}

/// Solves for a profile given as an existing CSV file or as an expression.
fn solve_profile(grid: &Arc<AnnulusGrid>, source: &str, gamma: f64) -> Result<SteadyState, Error> {
    let path = Path::new(source);
    if path.is_file() {
        let c = curve_from_csv(&read(path)?)?;
        let f = Profile1D::new(c.lo, c.hi, c.values);
        return solve_steady(grid, &f, gamma, None);
    }
    let e = Expr::parse(source).map_err(|_| Error::ProfileNotFound(source.to_string()))?;
    solve_steady_adapted(grid, &|s| e.eval(s), Some(&|s| e.eval_dual(s).1), gamma, DEFAULT_PROFILE_SAMPLES)
}

fn solve(geo: &GridArgs, profile: &str, out: &Path) -> CmdResult {
    let grid = build_grid(geo)?;
    let st = solve_profile(&grid, profile, geo.gamma)?;
    let e = energy(&st);
    let (lo, hi) = st.psi_range();
    write(out, "state.json", &(StateBundle::from_state(&st).to_json() + "\n"))?;
    let diag = json!({
        "newton_residual": st.newton_residual,
        "newton_iterations": st.newton_history.len() - 1,
        "inner_value": st.inner_value,
        "psi_min": lo,
        "psi_max": hi,
        "profile_interval": [st.profile.lo(), st.profile.hi()],
        "energy": e.gradient_form,
        "energy_green": e.green_form,
        "energy_discrepancy": e.discrepancy(),
    });
    write_json(out, "diagnostics.json", &diag)?;
    println!("{}", serde_json::to_string(&diag).unwrap());
    Ok(())
}

fn dist(state: &Path, out: &Path) -> CmdResult {
    let st = load_state(state)?;
    let geo = OrbitGeometry::build(&st.omega)?;
    let (a, ainv) = (&geo.dist.a, &geo.dist.ainv);
    let round_trip = ainv.curve.nodes().iter().map(|&m| (a.eval(ainv.eval(m)) - m).abs()).fold(0.0, f64::max);
    let t = t_of_state(&st)?;
    let mismatch = path_mismatch(&st, &t)?;
    write(out, "ainv.csv", &curve_to_csv(&ainv.curve, ("mu", "lambda")))?;
    write(out, "area.csv", &curve_to_csv(&a.curve, ("lambda", "mu")))?;
    let report = json!({
        "area": geo.area(),
        "omega_range": [geo.chart.omega_min, geo.chart.omega_max],
        "area_discrepancy": geo.dist.area_discrepancy,
        "round_trip": round_trip,
        "cross_path_mismatch": mismatch,
    });
    write_json(out, "dist.json", &report)?;
    println!("{}", serde_json::to_string(&report).unwrap());
    Ok(())
}

fn invert(geo: &GridArgs, profile: &str, target: &Path, config: Option<&Path>, out: &Path) -> CmdResult {
    let cfg = match config {
        Some(p) => MoserConfig::from_kv(&read(p)?)?,
        None => MoserConfig::default(),
    };
    let target = curve_from_csv(&read(target)?)?;
    let grid = build_grid(geo)?;
    let start = solve_profile(&grid, profile, geo.gamma)?;
    match moser_solve(&grid, &start.profile, geo.gamma, &target, &cfg) {
        Ok(o) => {
            write(out, "trace.csv", &o.trace.to_csv())?;
            write(out, "profile.csv", &curve_to_csv(&o.profile.curve, ("s", "F")))?;
            write(out, "state.json", &(StateBundle::from_state(&o.state).to_json() + "\n"))?;
            let summary = json!({
                "converged": o.trace.converged,
                "updates": o.trace.rows.len() - 1,
                "residual": o.trace.rows.last().map(|r| r.residual),
                "repairs": o.trace.repairs(),
            });
            write_json(out, "invert.json", &summary)?;
            println!("{}", serde_json::to_string(&summary).unwrap());
            if o.trace.converged {
                Ok(())
            } else {
                Err(Failure::NotConverged)
            }
        }
        Err(f) => {
            write(out, "trace.csv", &f.trace.to_csv())?;
            Err(Failure::Error(f.error))
        }
    }
}

fn check(suite: &str, cfg: &CheckConfig, out: &Path) -> CmdResult {
    let rows = run_suite(suite, cfg)?;
    write(out, &format!("check_{suite}.csv"), &rows_to_csv(&rows))?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    for r in &rows {
        println!("{} {:<48} {:>12.4e} (threshold {:.1e})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.value, r.threshold);
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

fn tangent(state: &Path, nu: Option<&Path>, seed: u64, out: &Path) -> CmdResult {
    let st = load_state(state)?;
    let grid = st.grid().clone();
    let nu = match nu {
        Some(p) => FieldFile::from_json(&read(p)?)?.into_field(&grid)?,
        None => poisson_bracket(&st.omega, &seeded_generator(&grid, seed)),
    };
    let geo = OrbitGeometry::build(&st.omega)?;
    let defect = geo.tangency_defect(&nu).sup_norm();
    let tol = geo.tangent_tol(&nu);
    let mut report = json!({ "defect": defect, "tolerance": tol, "tangent": defect <= tol, "nu_norm": nu.sup_norm() });
    if defect <= tol {
        let alpha = reconstruct_alpha(&geo, &nu)?;
        let residual = poisson_bracket(&st.omega, &alpha).sub(&nu).sup_norm();
        report["reconstruct_residual"] = json!(residual);
        write(out, "alpha.json", &(FieldFile::of(&alpha).to_json() + "\n"))?;
    }
    write_json(out, "tangent.json", &report)?;
    println!("{}", serde_json::to_string(&report).unwrap());
    if defect > tol {
        return Err(Failure::Error(Error::NotTangent { defect, tol }));
    }
    Ok(())
}
