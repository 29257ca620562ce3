//! Grid-based numerics for nonlinear potential theory: Bessel/Riesz
//! potentials, (alpha, s)-capacities with their extremal measures, Choquet
//! integrals, the gamma/beta/lambda functionals, the local Hardy-Littlewood
//! maximal operator, and a harness that sweeps randomized test families
//! through each capacitary inequality and reports the observed constants.
//!
//! Space is truncated to the cube `[-L, L]^dim` (dim 1..=3) sampled at cell
//! centers; potentials are computed by zero-padded spectral convolution with
//! cell-averaged kernel tables; capacities are solved as constrained convex
//! programs by a primal-dual first-order method with a duality-gap
//! certificate.

pub mod capacity;
pub mod choquet;
pub mod error;
pub mod fft;
pub mod functionals;
pub mod grid;
pub mod kernel;
pub mod maximal;
pub mod quad;
pub mod solver;
pub mod verify;

pub use error::{CoreError, Result};
pub use grid::{
    integrate, superlevel_set, unit_ball_cover, Atom, AtomicMeasure, BallCover, Field, Grid,
    GridSet,
};
pub use kernel::{
    bessel_value, build_table, check_two_sided, convolve, convolve_measure, riesz_value,
    KernelKind, KernelSpec, KernelTable,
};
