//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use steady_orbits::checks::reference_state;
use steady_orbits::grid::make_annulus;
use steady_orbits::{AnnulusGrid, SteadyState};

pub fn grid(nr: usize) -> Arc<AnnulusGrid> {
    make_annulus(1.0, 2.0, nr, 2 * nr).expect("valid annulus")
}

/// The reference state on an `nr × 2nr` grid.
pub fn reference(nr: usize) -> SteadyState {
    reference_state(&grid(nr)).expect("reference state solves")
}
