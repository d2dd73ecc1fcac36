//! Persistence: steady states as JSON, curves as two-column CSV, and Moser
//! parameters as flat `key = value` text.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::Curve1D;
use crate::error::{Error, Result};
use crate::grid::{make_annulus, AnnulusGrid, Field2D};
use crate::moser::MoserConfig;
use crate::profile::Profile1D;
use crate::steady::SteadyState;

/// Relative tolerance on node spacing when reading curves.
const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_inner: f64,
    pub r_outer: f64,
    pub nr: usize,
    pub ns: usize,
}

impl GridSpec {
    pub fn of(g: &AnnulusGrid) -> Self {
        Self { r_inner: g.r_inner, r_outer: g.r_outer, nr: g.nr, ns: g.ns }
    }

    pub fn build(&self) -> Result<Arc<AnnulusGrid>> {
        make_annulus(self.r_inner, self.r_outer, self.nr, self.ns)
    }
}

/// Serialized steady state. `psi` is row-major over the grid, radial index
/// outermost. The profile keeps its node slopes so a reloaded state is
/// bit-identical to the saved one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBundle {
    pub grid: GridSpec,
    pub gamma: f64,
    pub inner_value: f64,
    pub newton_residual: f64,
    pub profile: Curve1D,
    pub psi: Vec<f64>,
}

impl StateBundle {
    pub fn from_state(s: &SteadyState) -> Self {
        Self {
            grid: GridSpec::of(s.grid()),
            gamma: s.gamma,
            inner_value: s.inner_value,
            newton_residual: s.newton_residual,
            profile: s.profile.curve.clone(),
            psi: s.psi.values.clone(),
        }
    }

    pub fn into_state(self) -> Result<SteadyState> {
        let g = self.grid.build()?;
        let psi = Field2D::from_values(&g, self.psi)?;
        Ok(SteadyState::from_parts(Profile1D { curve: self.profile }, psi, self.gamma))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("state file: {e}")))
    }
}

/// A bare field on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn of(f: &Field2D) -> Self {
        Self { grid: GridSpec::of(&f.grid), values: f.values.clone() }
    }

    /// Rebuilds the field on `grid`, which must match the stored grid.
    pub fn into_field(self, grid: &Arc<AnnulusGrid>) -> Result<Field2D> {
        if self.grid != GridSpec::of(grid) {
            return Err(Error::InvalidGeometry("field file grid differs from the state grid".into()));
        }
        Field2D::from_values(grid, self.values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("field file: {e}")))
    }
}

/// `x,y` rows at the nodes of `c`, with the given header.
pub fn curve_to_csv(c: &Curve1D, header: (&str, &str)) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for i in 0..c.len() {
        s.push_str(&format!("{:e},{:e}\n", c.node(i), c.values[i]));
    }
    s
}

/// Reads two-column CSV. A first line that does not parse as numbers is
/// taken as a header. Abscissae must be uniformly spaced and increasing.
pub fn curve_from_csv(text: &str) -> Result<Curve1D> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() == 2).then(|| (cols[0].parse::<f64>(), cols[1].parse::<f64>()));
        match parsed {
            Some((Ok(x), Ok(y))) => {
                xs.push(x);
                ys.push(y);
            }
            _ if xs.is_empty() && ln == 0 => continue,
            _ => return Err(Error::Parse(format!("line {}: expected two numbers, got '{line}'", ln + 1))),
        }
    }
    if xs.len() < 4 {
        return Err(Error::Parse(format!("curve needs at least 4 samples, got {}", xs.len())));
    }
    let n = xs.len();
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::Parse("abscissae must increase".into()));
    }
    for (i, x) in xs.iter().enumerate() {
        let expect = xs[0] + i as f64 * h;
        if (x - expect).abs() > SPACING_TOL * (xs[n - 1] - xs[0]) {
            return Err(Error::Parse(format!("abscissa {i} ({x}) breaks uniform spacing")));
        }
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Parse("non-finite sample".into()));
    }
    Ok(Curve1D::new(xs[0], xs[n - 1], ys))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", ln + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl MoserConfig {
    /// Overrides defaults with keys `A`, `kappa`, `mu`, `beta`, `j`,
    /// `max_iter`, `floor_tol`; unknown keys are rejected. The result is
    /// validated.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = MoserConfig::default();
        for (k, v) in parse_kv(text)? {
            let num = || v.parse::<f64>().map_err(|_| Error::Parse(format!("{k}: bad number '{v}'")));
            let int = || v.parse::<usize>().map_err(|_| Error::Parse(format!("{k}: bad integer '{v}'")));
            match k.as_str() {
                "A" => c.a = num()?,
                "kappa" => c.kappa = num()?,
                "mu" => c.mu = num()?,
                "beta" => c.beta = num()?,
                "j" => c.j = int()?,
                "max_iter" => c.max_iter = int()?,
                "floor_tol" => c.floor_tol = num()?,
                _ => return Err(Error::InvalidConfig(format!("unknown key '{k}'"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "A = {}\nkappa = {}\nmu = {}\nbeta = {}\nj = {}\nmax_iter = {}\nfloor_tol = {:e}\n",
            self.a, self.kappa, self.mu, self.beta, self.j, self.max_iter, self.floor_tol
        )
    }
}
