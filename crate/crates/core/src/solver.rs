//! First-order primal-dual solver for obstacle-constrained `L^s` programs
//!
//! ```text
//! minimize (1/s) int f^s dx   over f >= 0
//! subject to (K f)(x) >= r(x) at every active cell,
//! ```
//!
//! where `K` is convolution with a positive kernel table and the active
//! cells are those with `r > 0`. Capacities take `r = 1_E`; the gamma
//! functional takes `r = |u|^{1/s}` on the whole grid.
//!
//! The iteration is a Chambolle-Pock primal-dual scheme. The dual update is
//! a clipped ascent on the multiplier, the primal update is the separable
//! prox of `f -> f^s / s` on the nonnegative half-line, and for `s = 2` the
//! objective is 1-strongly convex so the accelerated step-size schedule
//! applies. Step sizes are initialized from the spectral bound
//! `|K| <= h^dim max|FFT(kernel)|` of the padded circular operator, which
//! dominates the restricted linear operator.
//!
//! Every reported solve carries a duality-gap certificate: the primal value
//! is evaluated at the feasibly rescaled iterate `c f` with
//! `c = max r / (K f)`, the dual value at the current multiplier via
//! `D(lam) = <lam, r> - (1/s') int (K lam)^{s'} dx`, and the solve stops
//! once `(P - D) / P <= tol`. Reported values use the `int f^s`
//! normalization (no `1/s` factor).

use crate::error::{CoreError, Result};
use crate::grid::Field;
use crate::kernel::KernelTable;
use serde::{Deserialize, Serialize};

/// Stopping rule for one solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative duality-gap target.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-3, max_iters: 80_000 }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CoreError::InvalidProblem(format!(
                "tolerance must be in (0, 1), got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Outcome of one obstacle solve.
pub struct ObstacleSolution {
    /// Feasibly rescaled primal density: `K density >= r` on active cells.
    pub density: Field,
    /// Dual multiplier as a Lebesgue density, nonnegative, zero off the
    /// active cells.
    pub dual_density: Field,
    /// `int density^s dx`.
    pub value: f64,
    /// Dual objective in the same normalization; `value - dual_value` is
    /// the certified gap.
    pub dual_value: f64,
    /// Relative duality gap at termination.
    pub gap: f64,
    pub iterations: usize,
}

const CHECK_EVERY: usize = 25;

/// Prox of `t -> tau * t^s / s` on `t >= 0`: the root of
/// `t + tau t^{s-1} = v`, clipped to zero for `v <= 0`.
fn prox_power(v: f64, tau: f64, s: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if s == 2.0 {
        return v / (1.0 + tau);
    }
    // monotone scalar root on (0, v]
    let g = |t: f64| t + tau * t.powf(s - 1.0) - v;
    let mut lo = 0.0f64;
    let mut hi = v;
    let mut t = v / (1.0 + tau); // decent start for s near 2
    for _ in 0..60 {
        let gt = g(t);
        if gt.abs() <= 1e-14 * v {
            return t;
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let dg = 1.0 + tau * (s - 1.0) * t.powf(s - 2.0);
        let newton = t - gt / dg;
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    t
}

/// Solve the obstacle program for right-hand side `rhs` (active wherever
/// `rhs > 0`). Deterministic: no randomness, fixed iteration order.
pub fn solve_obstacle(
    table: &KernelTable,
    rhs: &Field,
    s: f64,
    opts: &SolveOptions,
) -> Result<ObstacleSolution> {
    if rhs.grid() != table.grid() {
        return Err(CoreError::GridMismatch);
    }
    if !(s > 1.0) {
        return Err(CoreError::InvalidProblem(format!("exponent s must be > 1, got {s}")));
    }
    opts.validate()?;
    if !rhs.nonneg() {
        return Err(CoreError::InvalidProblem("obstacle right-hand side must be >= 0".into()));
    }

    let grid = rhs.grid();
    let vol = grid.cell_volume();
    let len = grid.len();
    let s_conj = s / (s - 1.0);
    let active: Vec<usize> = (0..len).filter(|&i| rhs.values()[i] > 0.0).collect();

    if active.is_empty() {
        return Ok(ObstacleSolution {
            density: Field::zeros(grid),
            dual_density: Field::zeros(grid),
            value: 0.0,
            dual_value: 0.0,
            gap: 0.0,
            iterations: 0,
        });
    }

    let opnorm = table.operator_norm_bound();
    let mut tau = 1.0 / opnorm;
    let mut sigma = 1.0 / opnorm;
    let accelerate = s == 2.0; // objective is 1-strongly convex
    let r = rhs.values();

    let mut f = vec![0.0f64; len];
    let mut f_bar = vec![0.0f64; len];
    let mut lam = vec![0.0f64; len];

    let mut last_gap = f64::INFINITY;
    let mut iterations = 0usize;

    while iterations < opts.max_iters {
        iterations += 1;

        // dual ascent on the active cells
        let kfb = table.convolve(&Field::new(grid, f_bar.clone())?)?;
        let kfb = kfb.values();
        for &i in &active {
            lam[i] = (lam[i] + sigma * (r[i] - kfb[i])).max(0.0);
        }

        // primal prox
        let klam = table.convolve(&Field::new(grid, lam.clone())?)?;
        let klam = klam.values();
        let theta = if accelerate { 1.0 / (1.0 + 2.0 * tau).sqrt() } else { 1.0 };
        for i in 0..len {
            let v = f[i] + tau * klam[i];
            let fi = prox_power(v, tau, s);
            f_bar[i] = fi + theta * (fi - f[i]);
            f[i] = fi;
        }
        if accelerate {
            tau *= theta;
            sigma /= theta;
        }

        if iterations % CHECK_EVERY == 0 || iterations == opts.max_iters {
            // primal value at the feasibly rescaled iterate
            let kf = table.convolve(&Field::new(grid, f.clone())?)?;
            let kf = kf.values();
            let mut scale = 0.0f64;
            let mut feasible = true;
            for &i in &active {
                if kf[i] <= 0.0 {
                    feasible = false;
                    break;
                }
                scale = scale.max(r[i] / kf[i]);
            }
            if !feasible || scale == 0.0 {
                continue;
            }
            let primal_raw: f64 = f.iter().map(|&x| x.powf(s)).sum::<f64>() * vol;
            let primal = scale.powf(s) * primal_raw;

            // dual value: s * [ <lam, r> - (1/s') int (K lam)^{s'} ]
            let pairing: f64 = active.iter().map(|&i| lam[i] * r[i]).sum::<f64>() * vol;
            let conj: f64 = klam.iter().map(|&x| x.max(0.0).powf(s_conj)).sum::<f64>() * vol;
            let dual = s * (pairing - conj / s_conj);

            if dual > 0.0 && primal.is_finite() {
                let gap = (primal - dual) / primal;
                last_gap = gap;
                if gap <= opts.tol {
                    let density: Vec<f64> = f.iter().map(|&x| scale * x).collect();
                    return Ok(ObstacleSolution {
                        density: Field::new(grid, density)?,
                        dual_density: Field::new(grid, lam)?,
                        value: primal,
                        dual_value: dual,
                        gap,
                        iterations,
                    });
                }
            }
        }
    }

    Err(CoreError::NonConvergence { gap: last_gap, iterations, tol: opts.tol })
}
