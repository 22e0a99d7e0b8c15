//! Fixtures shared by the benchmarks.

use mfg_core::scenarios::monotone_congestion;
use mfg_core::{picard_solve, EquilibriumSolution, PicardOptions, ProblemSpec, TimeGrid};

/// The congestion model solved on `n_steps` cells.
pub fn solved_congestion(n_steps: usize) -> (ProblemSpec, EquilibriumSolution) {
    let spec = monotone_congestion(1.0).expect("scenario builds");
    let grid = TimeGrid::new(1.0, n_steps).expect("valid grid");
    let sol = picard_solve(&spec, grid, None, PicardOptions::default()).expect("solver runs");
    (spec, sol)
}
