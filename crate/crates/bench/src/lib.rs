//! Shared fixtures for the solver benchmarks.

use setflow_core::geometry::{rasterize, GridSpec, PerimeterScheme, Shape};
use setflow_core::grid_solver::StepProblem;

/// Brittle step on `[-1, 1]^2` with `n^2` cells: a disc of radius 0.6 inside a
/// forced annulus outside radius 0.5, with `a = 5`.
pub fn brittle_disc(n: usize, scheme: PerimeterScheme) -> StepProblem {
    let grid = GridSpec::square([-1.0, -1.0], 2.0, n).expect("valid grid");
    let prev = rasterize(&Shape::ball([0.0, 0.0], 0.6), &grid);
    let forced = rasterize(&Shape::complement(Shape::ball([0.0, 0.0], 0.5)), &grid);
    StepProblem::brittle(&prev, &forced, 5.0, scheme).expect("valid problem")
}

/// A brittle step small enough for exhaustive search (`n^2 <= 16` free cells).
pub fn tiny(n: usize) -> StepProblem {
    let grid = GridSpec::square([-1.0, -1.0], 2.0, n).expect("valid grid");
    let prev = rasterize(&Shape::ball([0.0, 0.0], 0.9), &grid);
    let forced = rasterize(&Shape::complement(Shape::ball([0.0, 0.0], 0.9)), &grid);
    StepProblem::brittle(&prev, &forced, 5.0, PerimeterScheme::Crofton).expect("valid problem")
}

#[cfg(test)]
mod tests {
    use super::*;
    use setflow_core::grid_solver::{brute_force_step, single_step, SolveParams};

    #[test]
    fn fixtures_solve() {
        assert!(single_step(&brittle_disc(32, PerimeterScheme::Crofton), &SolveParams::default()).is_ok());
        assert!(brute_force_step(&tiny(4)).is_ok());
    }
}
