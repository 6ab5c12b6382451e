//! Shared fixtures for the benchmarks.
use dgnash::game::GameSpec;
use dgnash::grid::Grid;
use dgnash::nash::{build_nash_map, NashBuildOptions, NashMap};
use dgnash::oracle;
use dgnash::value::ValueField;

pub fn example() -> GameSpec {
    GameSpec::example(vec![-1.0, 0.0, 1.0])
}

/// Example game on [-2, 2]^2 with `k` time steps and `res` nodes per side.
pub fn grid(spec: &GameSpec, k: usize, res: usize) -> Grid {
    Grid::for_game(spec, k, vec![-2.0, -2.0], vec![2.0, 2.0], vec![res, res]).expect("valid grid")
}

pub fn exact_lowers(grid: &Grid) -> (ValueField, ValueField) {
    let [w1, w2, _, _] = oracle::example_fields(grid);
    (w1, w2)
}

pub fn built_map(spec: &GameSpec, grid: &Grid, lowers: &(ValueField, ValueField)) -> NashMap {
    build_nash_map(spec, grid, &lowers.0, &lowers.1, &NashBuildOptions::default()).expect("build").0
}
