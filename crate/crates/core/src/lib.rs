//! Steady 2D Euler flows on an annulus and the co-adjoint orbit machinery
//! around them: elliptic solves with circulation conditions, level-set charts
//! and coarea functionals, vorticity distribution functions, and a Moser-type
//! inversion of the map from vorticity profiles to distribution functions.

// `!(x > 0.0)` is used on purpose so that NaN fails validation; index loops
// mirror the stencil and matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod checks;
pub mod curve;
pub mod elliptic;
pub mod error;
pub mod expr;
pub mod fd;
pub mod grid;
pub mod interp;
pub mod io;
pub mod moser;
pub mod orbit;
pub mod profile;
pub mod reference;
pub mod steady;
pub mod tame;

pub use curve::{Curve1D, Monotone1D};
pub use elliptic::NdReport;
pub use error::{Error, Result};
pub use moser::{MoserConfig, MoserTrace};
pub use grid::{AnnulusGrid, Boundary, BoundaryData, Field2D};
pub use orbit::{LevelChart, OrbitGeometry};
pub use profile::Profile1D;
pub use steady::SteadyState;
