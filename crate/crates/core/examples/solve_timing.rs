//! Rough timing of representative capacity solves at several resolutions.

use captool_core::grid::{Field, Grid, GridSet};
use captool_core::kernel::{KernelSpec, KernelTable};
use captool_core::solver::{solve_obstacle, SolveOptions};
use std::time::Instant;

fn run(dim: usize, n: usize, alpha: f64, s: f64, tol: f64) {
    let grid = Grid::new(dim, n, 4.0).unwrap();
    let spec = KernelSpec::bessel(alpha, dim).unwrap();
    let t0 = Instant::now();
    let table = KernelTable::build(spec, grid).unwrap();
    let t_table = t0.elapsed();

    let set = GridSet::ball(grid, [0.3, 0.2, 0.0], 0.5);
    let rhs = Field::indicator(&set);
    let t1 = Instant::now();
    let sol = solve_obstacle(&table, &rhs, s, &SolveOptions { tol, max_iters: 200_000 }).unwrap();
    let t_solve = t1.elapsed();
    println!(
        "dim {dim} n {n:4} alpha {alpha} s {s} tol {tol:.0e}: table {:8.1?}  solve {:8.1?}  iters {:6}  value {:.6}  gap {:.2e}",
        t_table, t_solve, sol.iterations, sol.value, sol.gap
    );
}

fn main() {
    run(1, 256, 0.5, 2.0, 1e-3);
    run(1, 512, 0.5, 2.0, 1e-3);
    run(1, 512, 0.5, 2.0, 1e-4);
    run(1, 512, 0.5, 1.5, 1e-3);
    run(2, 128, 1.0, 2.0, 1e-3);
    run(2, 128, 0.5, 2.0, 1e-3);
    run(2, 256, 1.0, 2.0, 1e-3);
}
