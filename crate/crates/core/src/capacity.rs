//! The (alpha, s)-capacity of grid sets as a constrained convex program,
//! the capacitary (extremal) measure with its defining identities, and the
//! quasi-additivity ratio over unit-ball covers.
//!
//! `Cap(E) = inf { int f^s dx : f >= 0, (K f) >= 1 on E }` is solved by the
//! primal-dual scheme in [`crate::solver`]; the optimal dual multiplier is
//! the capacitary measure, linked to the primal through
//! `f* = (K mu)^{s'-1}`, and its potential `V = K((K mu)^{s'-1})` satisfies
//!
//! ```text
//! mu(E) = Cap(E) = int V dmu = int (K mu)^{s'} dx,   V >= 1 on E
//! ```
//!
//! up to the solver tolerance.

use crate::error::{CoreError, Result};
use crate::grid::{BallCover, Field, Grid, GridSet};
use crate::kernel::{KernelKind, KernelSpec, KernelTable};
use crate::solver::{solve_obstacle, SolveOptions};
use dashmap::DashMap;
use rayon::prelude::*;

use std::path::PathBuf;

/// Guard for `x^(s'-1)` at cells where the dual potential vanishes.
const POWER_CLAMP: f64 = 1e-300;

/// One capacity computation: kernel, grid, target set, and exponent.
#[derive(Debug, Clone)]
pub struct CapacityProblem {
    pub spec: KernelSpec,
    pub grid: Grid,
    pub set: GridSet,
    pub s: f64,
}

impl CapacityProblem {
    pub fn new(spec: KernelSpec, grid: Grid, set: GridSet, s: f64) -> Result<Self> {
        if set.grid() != grid {
            return Err(CoreError::GridMismatch);
        }
        if spec.dim != grid.dim() {
            return Err(CoreError::InvalidProblem(
                "kernel and grid dimensions differ".into(),
            ));
        }
        if !(s > 1.0) {
            return Err(CoreError::InvalidProblem(format!("exponent s must be > 1, got {s}")));
        }
        let n = grid.dim() as f64;
        if spec.kind == KernelKind::Bessel && spec.alpha * s > n {
            return Err(CoreError::InvalidProblem(format!(
                "Bessel capacity requires alpha > 0 and s > 1 with alpha * s <= dim; \
                 got alpha * s = {} > {n}",
                spec.alpha * s
            )));
        }
        Ok(CapacityProblem { spec, grid, set, s })
    }

    /// Conjugate exponent `s' = s / (s - 1)`.
    pub fn s_conj(&self) -> f64 {
        self.s / (self.s - 1.0)
    }
}

/// Capacity value with its primal/dual certificates.
pub struct CapacityResult {
    /// `int f*^s dx` at the feasible primal density.
    pub value: f64,
    /// Feasible primal density, `K f_star >= 1` on the set.
    pub f_star: Field,
    /// Capacitary measure as cell masses on the set (zero elsewhere).
    pub mu_star: Field,
    /// Potential `V = K((K mu)^{s'-1})` of the capacitary measure.
    pub v: Field,
    /// Relative duality gap certified at termination.
    pub gap: f64,
    pub iterations: usize,
}

/// `x -> max(x, clamp)^(e)`, the dual-to-primal power map.
fn dual_power(field: &Field, e: f64) -> Field {
    let values = field
        .values()
        .iter()
        .map(|&x| if x <= 0.0 { 0.0 } else { x.max(POWER_CLAMP).powf(e) })
        .collect();
    Field::new(field.grid(), values).expect("powers of finite values are finite")
}

/// Compute `Cap_{alpha,s}(E)` with a duality-gap certificate.
pub fn capacity(
    problem: &CapacityProblem,
    table: &KernelTable,
    opts: &SolveOptions,
) -> Result<CapacityResult> {
    if table.grid() != problem.grid {
        return Err(CoreError::GridMismatch);
    }
    if problem.set.is_empty() {
        let zero = Field::zeros(problem.grid);
        return Ok(CapacityResult {
            value: 0.0,
            f_star: zero.clone(),
            mu_star: zero.clone(),
            v: zero.clone(),
            gap: 0.0,
            iterations: 0,
        });
    }
    let rhs = Field::indicator(&problem.set);
    let sol = solve_obstacle(table, &rhs, problem.s, opts)?;

    // masses per cell from the dual Lebesgue density
    let vol = problem.grid.cell_volume();
    let mu_star = sol.dual_density.scale(vol);
    // V = K((K lambda)^{s'-1})
    let k_mu = table.convolve(&sol.dual_density)?;
    let v = table.convolve(&dual_power(&k_mu, problem.s_conj() - 1.0))?;

    Ok(CapacityResult {
        value: sol.value,
        f_star: sol.density,
        mu_star,
        v,
        gap: sol.gap,
        iterations: sol.iterations,
    })
}

/// The capacitary measure together with the three extremal identities,
/// each reported as a ratio against the capacity value.
pub struct CapacitaryMeasure {
    pub mu: Field,
    pub v: Field,
    /// `(mu(E)/Cap, int V dmu / Cap, int (K mu)^{s'} dx / Cap)`.
    pub identities: [f64; 3],
    /// Minimum of `V` over the cells of `E` (1.0 for the empty set).
    pub min_potential_on_set: f64,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Solve and report the extremal-measure identities. The internal solve is
/// tightened a notch below `opts.tol` so the identities land inside the
/// `[1 - 5 tol, 1 + 5 tol]` band the certificates promise.
pub fn capacitary_measure(
    problem: &CapacityProblem,
    table: &KernelTable,
    opts: &SolveOptions,
) -> Result<CapacitaryMeasure> {
    if problem.set.is_empty() {
        let zero = Field::zeros(problem.grid);
        return Ok(CapacitaryMeasure {
            mu: zero.clone(),
            v: zero,
            identities: [1.0, 1.0, 1.0],
            min_potential_on_set: 1.0,
            value: 0.0,
            gap: 0.0,
            iterations: 0,
        });
    }
    let tight = SolveOptions { tol: opts.tol * 0.2, max_iters: opts.max_iters };
    let result = capacity(problem, table, &tight)?;

    let vol = problem.grid.cell_volume();
    let s_conj = problem.s_conj();
    let mass: f64 = result.mu_star.values().iter().sum();
    let v_pairing: f64 = result
        .v
        .values()
        .iter()
        .zip(result.mu_star.values())
        .map(|(v, m)| v * m)
        .sum();
    let lambda = result.mu_star.scale(1.0 / vol);
    let k_mu = table.convolve(&lambda)?;
    let energy: f64 =
        k_mu.values().iter().map(|&x| x.max(0.0).powf(s_conj)).sum::<f64>() * vol;

    let min_v = problem
        .set
        .mask()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| result.v.values()[i])
        .fold(f64::INFINITY, f64::min);

    Ok(CapacitaryMeasure {
        identities: [mass / result.value, v_pairing / result.value, energy / result.value],
        min_potential_on_set: min_v,
        mu: result.mu_star,
        v: result.v,
        value: result.value,
        gap: result.gap,
        iterations: result.iterations,
    })
}

/// Per-ball breakdown of a quasi-additivity sweep.
pub struct QuasiAdditivity {
    /// `sum_j Cap(E inter B_j) / Cap(E)`.
    pub ratio: f64,
    pub cap_whole: f64,
    pub cap_sum: f64,
    /// `(ball index, Cap(E inter B_j))` for the nonempty intersections.
    pub per_ball: Vec<(usize, f64)>,
    pub multiplicity: usize,
}

/// Sum the capacities of `E inter B_j` over a unit-ball cover and compare
/// with `Cap(E)`. All sub-solves run at the same tolerance; a failing ball
/// aborts with its index.
pub fn quasi_additivity_ratio(
    problem: &CapacityProblem,
    table: &KernelTable,
    cover: &BallCover,
    opts: &SolveOptions,
) -> Result<QuasiAdditivity> {
    let whole = capacity(problem, table, opts)?;
    if !(whole.value > 0.0) {
        return Err(CoreError::InvalidProblem(
            "quasi-additivity needs a set of positive capacity".into(),
        ));
    }

    let pieces: Vec<(usize, GridSet)> = cover
        .balls
        .iter()
        .enumerate()
        .filter_map(|(j, ball)| {
            let inter = problem.set.intersect(ball).ok()?;
            if inter.is_empty() {
                None
            } else {
                Some((j, inter))
            }
        })
        .collect();

    // sub-solves share only the immutable table; merge by ball index
    let per_ball: Vec<(usize, f64)> = pieces
        .into_par_iter()
        .map(|(j, piece)| {
            let sub = CapacityProblem::new(problem.spec, problem.grid, piece, problem.s)?;
            let res = capacity(&sub, table, opts).map_err(|e| CoreError::BallSolveFailed {
                index: j,
                source: Box::new(e),
            })?;
            Ok((j, res.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let cap_sum: f64 = per_ball.iter().map(|(_, v)| v).sum();

    Ok(QuasiAdditivity {
        ratio: cap_sum / whole.value,
        cap_whole: whole.value,
        cap_sum,
        per_ball,
        multiplicity: cover.multiplicity,
    })
}

/// Exact cache key for one capacity value: every parameter that can change
/// the number, including the full bit-packed mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    kind: KernelKind,
    alpha_bits: u64,
    dim: usize,
    n: usize,
    l_bits: u64,
    s_bits: u64,
    tol_bits: u64,
    mask: Vec<u64>,
}

impl CacheKey {
    fn new(spec: &KernelSpec, grid: Grid, set: &GridSet, s: f64, tol: f64) -> Self {
        CacheKey {
            kind: spec.kind,
            alpha_bits: spec.alpha.to_bits(),
            dim: grid.dim(),
            n: grid.points_per_axis(),
            l_bits: grid.half_extent().to_bits(),
            s_bits: s.to_bits(),
            tol_bits: tol.to_bits(),
            mask: set.packed_bits(),
        }
    }

    /// Stable fingerprint used as the on-disk file name.
    fn fingerprint(&self) -> u128 {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};
        let mut h1 = DefaultHasher::new();
        self.hash(&mut h1);
        let mut h2 = DefaultHasher::new();
        0xA5A5_5A5A_u64.hash(&mut h2);
        self.hash(&mut h2);
        ((h1.finish() as u128) << 64) | h2.finish() as u128
    }
}

/// Cached scalar outcome of a capacity solve.
#[derive(Debug, Clone, Copy)]
pub struct CachedCapacity {
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Concurrent insert-or-get cache of capacity values keyed by
/// (mask, kernel, exponent, tolerance). Superlevel sets repeat across the
/// Choquet functionals, so hits are common. An optional directory adds a
/// persistent layer (one small text file per key).
pub struct CapCache {
    map: DashMap<CacheKey, CachedCapacity>,
    disk_dir: Option<PathBuf>,
}

impl CapCache {
    pub fn new() -> Self {
        CapCache { map: DashMap::new(), disk_dir: None }
    }

    /// A cache backed by `dir` (created on first write).
    pub fn with_disk(dir: PathBuf) -> Self {
        CapCache { map: DashMap::new(), disk_dir: Some(dir) }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Capacity of `set`, served from cache when possible.
    pub fn capacity_value(
        &self,
        table: &KernelTable,
        set: &GridSet,
        s: f64,
        opts: &SolveOptions,
    ) -> Result<CachedCapacity> {
        if set.is_empty() {
            return Ok(CachedCapacity { value: 0.0, gap: 0.0, iterations: 0 });
        }
        let key = CacheKey::new(table.spec(), table.grid(), set, s, opts.tol);
        if let Some(hit) = self.map.get(&key) {
            return Ok(*hit);
        }
        if let Some(hit) = self.disk_get(&key) {
            self.map.insert(key, hit);
            return Ok(hit);
        }
        let problem = CapacityProblem::new(*table.spec(), table.grid(), set.clone(), s)?;
        let res = capacity(&problem, table, opts)?;
        let cached = CachedCapacity { value: res.value, gap: res.gap, iterations: res.iterations };
        self.disk_put(&key, &cached);
        self.map.insert(key, cached);
        Ok(cached)
    }

    fn disk_path(&self, key: &CacheKey) -> Option<PathBuf> {
        self.disk_dir.as_ref().map(|d| d.join(format!("{:032x}.capcache", key.fingerprint())))
    }

    fn disk_get(&self, key: &CacheKey) -> Option<CachedCapacity> {
        let path = self.disk_path(key)?;
        let text = std::fs::read_to_string(path).ok()?;
        let mut lines = text.lines();
        if lines.next()? != "captool-capcache-v1" {
            return None;
        }
        let value: f64 = lines.next()?.parse().ok()?;
        let gap: f64 = lines.next()?.parse().ok()?;
        let iterations: usize = lines.next()?.parse().ok()?;
        Some(CachedCapacity { value, gap, iterations })
    }

    fn disk_put(&self, key: &CacheKey, cached: &CachedCapacity) {
        let Some(path) = self.disk_path(key) else { return };
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        let body = format!(
            "captool-capcache-v1\n{:e}\n{:e}\n{}\n",
            cached.value, cached.gap, cached.iterations
        );
        let _ = std::fs::write(path, body);
    }
}

impl Default for CapCache {
    fn default() -> Self {
        CapCache::new()
    }
}
