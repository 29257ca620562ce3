//! The minimization functionals of the capacity theory: `gamma` (a certified
//! convex solve), `beta` (objective evaluation plus the constructive dyadic
//! witness), the KV upper bound, the lambda surrogate, and the two
//! capacity-normalized supremum norms (multiplier norm, measure norm).
//!
//! `beta` is the nonconvex functional
//! `inf { int f^s (K f)^{1-s} dx : f >= 0, K f >= |u| }`; it is reported
//! through the witness assembled from capacitary measures of the dyadic
//! bands `E_k = {2^{k-1} < u <= 2^k}` intersected with a unit-ball cover:
//! `F = sup_{j,k} 2^k f_{j,k} (K f_{j,k})^{s-1}` with
//! `f_{j,k} = (K mu_{j,k})^{s'-1}`, rescaled by the smallest `c >= 1` that
//! makes `K(cF) >= u` everywhere. The rescale constant is the witness
//! quality metric; values above 100 fail.

use crate::capacity::{capacity, CapCache, CapacityProblem};
use crate::error::{CoreError, Result};
use crate::grid::{unit_ball_cover, AtomicMeasure, Field, Grid, GridSet};
use crate::kernel::KernelTable;
use crate::solver::{solve_obstacle, SolveOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Witness quality limit: rescale constants above this are failures.
const RESCALE_LIMIT: f64 = 100.0;
/// Relative feasibility slack allowed when checking `K f >= |u|`.
const FEASIBILITY_SLACK: f64 = 1e-9;
const POWER_CLAMP: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Gamma,
    Beta,
    LambdaUpper,
    KvUpper,
    Multiplier,
    MeasureNorm,
}

/// A witness realizing (or upper-bounding) a functional value.
#[derive(Debug, Clone)]
pub enum Witness {
    Density(Field),
    Measure(AtomicMeasure),
}

/// Value of one functional, with certification status and quality data.
#[derive(Debug, Clone)]
pub struct FunctionalValue {
    pub kind: FunctionalKind,
    pub value: f64,
    pub witness: Option<Witness>,
    /// True when a duality gap certifies near-optimality; upper bounds are
    /// reported with `certified = false`.
    pub certified: bool,
    /// Witness rescale constant (beta/lambda witnesses only).
    pub rescale_constant: Option<f64>,
    /// Certified relative gap, when available.
    pub gap: Option<f64>,
    /// Family members skipped for having capacity below tolerance.
    pub skipped_members: usize,
    /// Weighted capacity mass of the dyadic pieces dropped from the
    /// witness for falling below the capacity floor (beta/lambda only).
    pub dropped_contribution: Option<f64>,
}

impl FunctionalValue {
    fn bare(kind: FunctionalKind, value: f64) -> Self {
        FunctionalValue {
            kind,
            value,
            witness: None,
            certified: false,
            rescale_constant: None,
            gap: None,
            skipped_members: 0,
            dropped_contribution: None,
        }
    }
}

/// `gamma(u) = inf { int f^s : f >= 0, K f >= |u|^{1/s} }`: the same
/// convex program as a capacity, with the indicator replaced by
/// `|u|^{1/s}`, certified by its duality gap.
pub fn gamma_functional(
    u: &Field,
    table: &KernelTable,
    s: f64,
    opts: &SolveOptions,
) -> Result<FunctionalValue> {
    let rhs = u.map(|v| v.abs().powf(1.0 / s))?;
    let sol = solve_obstacle(table, &rhs, s, opts)?;
    Ok(FunctionalValue {
        kind: FunctionalKind::Gamma,
        value: sol.value,
        witness: Some(Witness::Density(sol.density)),
        certified: true,
        rescale_constant: None,
        gap: Some(sol.gap),
        skipped_members: 0,
        dropped_contribution: None,
    })
}

/// Evaluate `int f^s (K f)^{1-s} dx` for a feasible density (`K f >= |u|`
/// at every grid point, up to a relative slack of 1e-9). Cells with
/// `f = 0` contribute zero.
pub fn beta_value(u: &Field, f: &Field, table: &KernelTable, s: f64) -> Result<f64> {
    if u.grid() != f.grid() || f.grid() != table.grid() {
        return Err(CoreError::GridMismatch);
    }
    if !f.nonneg() {
        return Err(CoreError::InvalidProblem("beta density must be nonnegative".into()));
    }
    let kf = table.convolve(f)?;
    let u_scale = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut violation = 0.0f64;
    for (uv, kv) in u.values().iter().zip(kf.values()) {
        violation = violation.max(uv.abs() - kv);
    }
    if violation > FEASIBILITY_SLACK * u_scale.max(f64::MIN_POSITIVE) {
        return Err(CoreError::Infeasible { violation });
    }
    Ok(beta_objective(f, &kf, s))
}

/// The integrand sum of `beta_value`, given the precomputed potential.
fn beta_objective(f: &Field, kf: &Field, s: f64) -> f64 {
    let vol = f.grid().cell_volume();
    f.values()
        .iter()
        .zip(kf.values())
        .filter(|(&fv, _)| fv > 0.0)
        .map(|(&fv, &kv)| fv.powf(s) * kv.max(POWER_CLAMP).powf(1.0 - s))
        .sum::<f64>()
        * vol
}

fn dual_power(field: &Field, e: f64) -> Field {
    let values = field
        .values()
        .iter()
        .map(|&x| if x <= 0.0 { 0.0 } else { x.max(POWER_CLAMP).powf(e) })
        .collect();
    Field::new(field.grid(), values).expect("finite powers")
}

/// Outcome pieces of the dyadic witness construction, for reporting.
pub struct BetaWitnessOptions {
    /// Dyadic band range `k_min ..= k_max` (levels `2^k`).
    pub k_min: i32,
    pub k_max: i32,
    pub solve: SolveOptions,
    /// Steps of the optional projected-gradient polish (0 = off). The
    /// polish can only decrease the reported bound.
    pub polish_steps: usize,
}

impl Default for BetaWitnessOptions {
    fn default() -> Self {
        BetaWitnessOptions {
            k_min: -12,
            k_max: 6,
            solve: SolveOptions::default(),
            polish_steps: 0,
        }
    }
}

/// Constructive upper bound for `beta(u)` from the proof decomposition:
/// capacitary measures of the band-by-ball pieces, cellwise supremum,
/// feasibility rescale. Not certified.
pub fn beta_witness_from_choquet(
    u: &Field,
    table: &KernelTable,
    s: f64,
    wopts: &BetaWitnessOptions,
) -> Result<FunctionalValue> {
    if !u.nonneg() {
        return Err(CoreError::InvalidProblem("witness construction needs u >= 0".into()));
    }
    let grid = u.grid();
    if grid != table.grid() {
        return Err(CoreError::GridMismatch);
    }
    if u.max_value() <= 0.0 {
        return Ok(FunctionalValue::bare(FunctionalKind::Beta, 0.0));
    }

    let cover = unit_ball_cover(grid)?;
    let s_conj = s / (s - 1.0);

    // gather the nonempty band-by-ball pieces, then solve them in parallel
    // (they share only the immutable table; merged in piece order)
    struct Piece {
        k: i32,
        cap: f64,
        lambda: Field,
    }
    let mut cells: Vec<(i32, GridSet)> = Vec::new();
    for k in wopts.k_min..=wopts.k_max {
        let lo = (k as f64 - 1.0).exp2();
        let hi = (k as f64).exp2();
        let band_mask: Vec<bool> = u.values().iter().map(|&v| v > lo && v <= hi).collect();
        let band = GridSet::from_mask(grid, band_mask)?;
        if band.is_empty() {
            continue;
        }
        for ball in &cover.balls {
            let piece = band.intersect(ball)?;
            if !piece.is_empty() {
                cells.push((k, piece));
            }
        }
    }
    let pieces: Vec<Piece> = cells
        .into_par_iter()
        .map(|(k, piece)| {
            let problem = CapacityProblem::new(*table.spec(), grid, piece, s)?;
            let res = capacity(&problem, table, &wopts.solve)?;
            let lambda = res.mu_star.scale(1.0 / grid.cell_volume());
            Ok(Piece { k, cap: res.value, lambda })
        })
        .collect::<Result<Vec<_>>>()?;
    if pieces.is_empty() {
        return Err(CoreError::InvalidProblem(
            "no dyadic band intersects the range of u; widen the level range".into(),
        ));
    }

    // drop pieces of negligible capacity, logging their contribution
    let cap_scale = pieces.iter().map(|p| p.cap).fold(0.0f64, f64::max);
    let drop_below = 10.0 * wopts.solve.tol * cap_scale;
    let mut dropped_contribution = 0.0;
    let mut f_sup = vec![0.0f64; grid.len()];
    for piece in &pieces {
        if piece.cap < drop_below {
            dropped_contribution += (piece.k as f64).exp2() * piece.cap;
            continue;
        }
        let k_mu = table.convolve(&piece.lambda)?;
        let f_jk = dual_power(&k_mu, s_conj - 1.0);
        let kf_jk = table.convolve(&f_jk)?;
        let weight = (piece.k as f64).exp2();
        for ((acc, &fv), &kv) in f_sup.iter_mut().zip(f_jk.values()).zip(kf_jk.values()) {
            let candidate = weight * fv * kv.max(POWER_CLAMP).powf(s - 1.0);
            if candidate > *acc {
                *acc = candidate;
            }
        }
    }

    let f_sup = Field::new(grid, f_sup)?;
    let kf_sup = table.convolve(&f_sup)?;
    let mut c_needed = 0.0f64;
    for (&uv, &kv) in u.values().iter().zip(kf_sup.values()) {
        if uv > 0.0 {
            if kv <= 0.0 {
                c_needed = f64::INFINITY;
                break;
            }
            c_needed = c_needed.max(uv / kv);
        }
    }
    let c = c_needed.max(1.0) * (1.0 + 1e-6);
    if !(c <= RESCALE_LIMIT) {
        return Err(CoreError::WitnessQuality { c });
    }

    let mut witness = f_sup.scale(c);
    let mut value = beta_value(u, &witness, table, s)?;

    for _ in 0..wopts.polish_steps {
        match polish_step(u, &witness, table, s)? {
            Some((better, better_value)) if better_value < value => {
                witness = better;
                value = better_value;
            }
            _ => break,
        }
    }

    Ok(FunctionalValue {
        kind: FunctionalKind::Beta,
        value,
        witness: Some(Witness::Density(witness)),
        certified: false,
        rescale_constant: Some(c),
        gap: None,
        skipped_members: 0,
        dropped_contribution: Some(dropped_contribution),
    })
}

/// One projected-gradient step on `f -> int f^s (K f)^{1-s}` followed by a
/// feasibility rescale; returns the candidate only if it evaluates.
fn polish_step(
    u: &Field,
    f: &Field,
    table: &KernelTable,
    s: f64,
) -> Result<Option<(Field, f64)>> {
    let kf = table.convolve(f)?;
    // gradient: s f^{s-1} (Kf)^{1-s} + (1-s) K[ f^s (Kf)^{-s} ]
    let term1: Vec<f64> = f
        .values()
        .iter()
        .zip(kf.values())
        .map(|(&fv, &kv)| {
            if fv <= 0.0 {
                0.0
            } else {
                s * fv.powf(s - 1.0) * kv.max(POWER_CLAMP).powf(1.0 - s)
            }
        })
        .collect();
    let inner: Vec<f64> = f
        .values()
        .iter()
        .zip(kf.values())
        .map(|(&fv, &kv)| {
            if fv <= 0.0 {
                0.0
            } else {
                fv.powf(s) * kv.max(POWER_CLAMP).powf(-s)
            }
        })
        .collect();
    let kinner = table.convolve(&Field::new(f.grid(), inner)?)?;
    let fmax = f.max_value();
    if fmax <= 0.0 {
        return Ok(None);
    }
    let gnorm = term1
        .iter()
        .zip(kinner.values())
        .map(|(a, b)| (a + (1.0 - s) * b).abs())
        .fold(0.0f64, f64::max);
    if gnorm <= 0.0 {
        return Ok(None);
    }
    let step = 0.1 * fmax / gnorm;
    let moved: Vec<f64> = f
        .values()
        .iter()
        .zip(term1.iter().zip(kinner.values()))
        .map(|(&fv, (t1, &t2))| (fv - step * (t1 + (1.0 - s) * t2)).max(0.0))
        .collect();
    let moved = Field::new(f.grid(), moved)?;
    let kmoved = table.convolve(&moved)?;
    let mut c = 0.0f64;
    for (&uv, &kv) in u.values().iter().zip(kmoved.values()) {
        if uv > 0.0 {
            if kv <= 0.0 {
                return Ok(None);
            }
            c = c.max(uv / kv);
        }
    }
    let rescaled = moved.scale(c * (1.0 + 1e-9));
    let value = beta_value(u, &rescaled, table, s)?;
    Ok(Some((rescaled, value)))
}

/// Separable truncated-Gaussian smoothing with discrete weight
/// normalization (constants are preserved; clipped at the boundary).
pub fn gaussian_mollify(f: &Field, sigma: f64) -> Result<Field> {
    let grid = f.grid();
    let h = grid.spacing();
    let reach = ((4.0 * sigma / h).ceil() as isize).max(1);
    let weights: Vec<f64> = (-reach..=reach)
        .map(|k| {
            let x = k as f64 * h;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();

    let n = grid.points_per_axis() as isize;
    let mut values = f.values().to_vec();
    for axis in 0..grid.dim() {
        let mut next = vec![0.0f64; values.len()];
        for flat in 0..values.len() {
            let idx = grid.multi_index(flat);
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (wi, &w) in weights.iter().enumerate() {
                let o = wi as isize - reach;
                let j = idx[axis] as isize + o;
                if j < 0 || j >= n {
                    continue;
                }
                let mut jdx = idx;
                jdx[axis] = j as usize;
                acc += w * values[grid.flat_index(jdx)];
                wsum += w;
            }
            next[flat] = acc / wsum;
        }
        values = next;
    }
    Field::new(grid, values)
}

/// KV upper bound: the minimum of `int h^s (K h)^{1-s} dx` over `h = |f|`
/// and mollified-then-rescaled dominators of `|f|` at scales h, 2h, 4h.
pub fn kv_upper(f: &Field, table: &KernelTable, s: f64) -> Result<FunctionalValue> {
    let grid = f.grid();
    let base = f.abs();
    if base.max_value() <= 0.0 {
        return Ok(FunctionalValue::bare(FunctionalKind::KvUpper, 0.0));
    }
    let h = grid.spacing();
    let mut candidates: Vec<Field> = vec![base.clone()];
    for scale in [h, 2.0 * h, 4.0 * h] {
        let smooth = gaussian_mollify(&base, scale)?;
        // rescale to dominate |f|
        let mut c = 0.0f64;
        for (&bv, &sv) in base.values().iter().zip(smooth.values()) {
            if bv > 0.0 {
                if sv <= 0.0 {
                    c = f64::INFINITY;
                    break;
                }
                c = c.max(bv / sv);
            }
        }
        if c.is_finite() {
            candidates.push(smooth.scale(c * (1.0 + 1e-12)));
        }
    }

    let mut best: Option<(f64, Field)> = None;
    for cand in candidates {
        let kc = table.convolve(&cand)?;
        let obj = beta_objective(&cand, &kc, s);
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, cand));
        }
    }
    let (value, witness) = best.expect("at least |f| itself is a candidate");
    Ok(FunctionalValue {
        kind: FunctionalKind::KvUpper,
        value,
        witness: Some(Witness::Density(witness)),
        certified: false,
        rescale_constant: None,
        gap: None,
        skipped_members: 0,
        dropped_contribution: None,
    })
}

/// Lambda surrogate: the beta witness value, standing in for the Koethe
/// dual norm through the chain bound; labeled uncertified.
pub fn lambda_upper(
    u: &Field,
    table: &KernelTable,
    s: f64,
    wopts: &BetaWitnessOptions,
) -> Result<FunctionalValue> {
    let beta = beta_witness_from_choquet(u, table, s, wopts)?;
    Ok(FunctionalValue { kind: FunctionalKind::LambdaUpper, ..beta })
}

/// Multiplier norm lower estimate over a finite family of sets:
/// `max_K (int_K |f|^p dx / Cap(K))^{1/p}`. Members whose capacity is at or
/// below the solver tolerance are skipped and counted.
pub fn multiplier_norm(
    f: &Field,
    p: f64,
    table: &KernelTable,
    s: f64,
    family: &[GridSet],
    cache: &CapCache,
    opts: &SolveOptions,
) -> Result<FunctionalValue> {
    if !(p > 1.0) {
        return Err(CoreError::InvalidProblem(format!("multiplier norm needs p > 1, got {p}")));
    }
    if family.is_empty() {
        return Err(CoreError::InvalidProblem("multiplier norm needs a nonempty family".into()));
    }
    let vol = f.grid().cell_volume();
    let mut best = 0.0f64;
    let mut skipped = 0usize;
    for set in family {
        let cap = cache.capacity_value(table, set, s, opts)?;
        if cap.value <= opts.tol {
            skipped += 1;
            continue;
        }
        let mass: f64 = set
            .mask()
            .iter()
            .zip(f.values())
            .filter(|(&m, _)| m)
            .map(|(_, &v)| v.abs().powf(p))
            .sum::<f64>()
            * vol;
        best = best.max(mass / cap.value);
    }
    Ok(FunctionalValue {
        kind: FunctionalKind::Multiplier,
        value: best.powf(1.0 / p),
        witness: None,
        certified: false,
        rescale_constant: None,
        gap: None,
        skipped_members: skipped,
        dropped_contribution: None,
    })
}

/// Measure norm lower estimate: `max_K mu(K) / Cap(K)` over the family.
pub fn measure_norm(
    mu: &AtomicMeasure,
    table: &KernelTable,
    s: f64,
    family: &[GridSet],
    cache: &CapCache,
    opts: &SolveOptions,
) -> Result<FunctionalValue> {
    if family.is_empty() {
        return Err(CoreError::InvalidProblem("measure norm needs a nonempty family".into()));
    }
    let mut best = 0.0f64;
    let mut skipped = 0usize;
    for set in family {
        let cap = cache.capacity_value(table, set, s, opts)?;
        if cap.value <= opts.tol {
            skipped += 1;
            continue;
        }
        best = best.max(mu.mass_on(set) / cap.value);
    }
    Ok(FunctionalValue {
        kind: FunctionalKind::MeasureNorm,
        value: best,
        witness: Some(Witness::Measure(mu.clone())),
        certified: false,
        rescale_constant: None,
        gap: None,
        skipped_members: skipped,
        dropped_contribution: None,
    })
}

/// Default supremum family: every dyadic sub-box with at least 4 cells per
/// axis, plus the nonempty superlevel sets of `|f|` at dyadic thresholds.
pub fn default_sup_family(grid: Grid, f: Option<&Field>) -> Vec<GridSet> {
    let mut family = Vec::new();
    let n = grid.points_per_axis();
    let mut side = n;
    let mut level = 0u32;
    while side >= 4 {
        let boxes_per_axis = n / side;
        let ranges: Vec<(usize, usize)> =
            (0..boxes_per_axis).map(|b| (b * side, (b + 1) * side)).collect();
        let dim = grid.dim();
        let mut push_box = |r: [(usize, usize); 3]| {
            let mask: Vec<bool> = (0..grid.len())
                .map(|flat| {
                    let idx = grid.multi_index(flat);
                    (0..dim).all(|a| idx[a] >= r[a].0 && idx[a] < r[a].1)
                })
                .collect();
            family.push(GridSet::from_mask(grid, mask).expect("mask sized to grid"));
        };
        match dim {
            1 => {
                for &r0 in &ranges {
                    push_box([r0, (0, 1), (0, 1)]);
                }
            }
            2 => {
                for &r0 in &ranges {
                    for &r1 in &ranges {
                        push_box([r0, r1, (0, 1)]);
                    }
                }
            }
            _ => {
                for &r0 in &ranges {
                    for &r1 in &ranges {
                        for &r2 in &ranges {
                            push_box([r0, r1, r2]);
                        }
                    }
                }
            }
        }
        side /= 2;
        level += 1;
        if level > 8 {
            break;
        }
    }
    if let Some(field) = f {
        let a = field.abs();
        for k in -12..=6 {
            let t = (k as f64).exp2();
            let mask: Vec<bool> = a.values().iter().map(|&v| v > t).collect();
            let set = GridSet::from_mask(grid, mask).expect("mask sized to grid");
            if !set.is_empty() {
                family.push(set);
            }
        }
    }
    family
}
