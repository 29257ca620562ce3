//! Local (centered) Hardy-Littlewood maximal operator on grids.
//!
//! `M f(x) = sup_{0 < r <= 1} average of |f| over B_r(x)`, with discrete
//! balls by cell-center membership and clipped-ball averaging at the
//! boundary (only interior cells count, normalized by the clipped measure).
//! The `r -> 0` end is the single-cell average `|f(x)|` itself, so
//! `M f >= |f|` holds exactly. Averages are direct stencil sums rather than
//! FFT products, so that sublinearity survives in floating point:
//! term-by-term `<=` is preserved by rounding-monotone additions.

use crate::error::{CoreError, Result};
use crate::grid::{Field, Grid};
use crate::kernel::KernelTable;
use serde::{Deserialize, Serialize};

/// Ball radii used by the maximal operator: always the dyadic ladder
/// `h, 2h, 4h, ...` capped at 1, the value 1 itself, and any extra radii
/// the caller supplies in `(0, 1]` that are at least one spacing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusSet {
    radii: Vec<f64>,
}

impl RadiusSet {
    /// The default dyadic ladder for a grid.
    pub fn auto(grid: Grid) -> Result<Self> {
        RadiusSet::with_extra(grid, &[])
    }

    pub fn with_extra(grid: Grid, extra: &[f64]) -> Result<Self> {
        let h = grid.spacing();
        if h > 1.0 {
            return Err(CoreError::GridTooCoarse { h });
        }
        let mut radii = Vec::new();
        let mut r = h;
        while r < 1.0 {
            radii.push(r);
            r *= 2.0;
        }
        radii.push(1.0);
        for &e in extra {
            if !(e > 0.0 && e <= 1.0) {
                return Err(CoreError::InvalidProblem(format!(
                    "maximal radius {e} outside (0, 1]"
                )));
            }
            if e < h {
                return Err(CoreError::InvalidProblem(format!(
                    "maximal radius {e} below the grid spacing {h}"
                )));
            }
            radii.push(e);
        }
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup();
        Ok(RadiusSet { radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// Integer offsets whose cell centers lie within distance `r`.
fn stencil(grid: Grid, r: f64) -> Vec<[isize; 3]> {
    let h = grid.spacing();
    let reach = (r / h).floor() as isize;
    let r2 = r * r;
    let mut offsets = Vec::new();
    match grid.dim() {
        1 => {
            for i in -reach..=reach {
                let d2 = (i as f64 * h) * (i as f64 * h);
                if d2 <= r2 {
                    offsets.push([i, 0, 0]);
                }
            }
        }
        2 => {
            for i in -reach..=reach {
                for j in -reach..=reach {
                    let d2 = ((i * i + j * j) as f64) * h * h;
                    if d2 <= r2 {
                        offsets.push([i, j, 0]);
                    }
                }
            }
        }
        _ => {
            for i in -reach..=reach {
                for j in -reach..=reach {
                    for k in -reach..=reach {
                        let d2 = ((i * i + j * j + k * k) as f64) * h * h;
                        if d2 <= r2 {
                            offsets.push([i, j, k]);
                        }
                    }
                }
            }
        }
    }
    offsets
}

/// The local maximal function of `f` over the given radii.
pub fn local_maximal(f: &Field, radii: &RadiusSet) -> Field {
    let grid = f.grid();
    let n = grid.points_per_axis() as isize;
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    // r -> 0 end: the cell itself
    let mut out = abs.clone();

    for &r in radii.radii() {
        let offsets = stencil(grid, r);
        for flat in 0..grid.len() {
            let idx = grid.multi_index(flat);
            let mut sum = 0.0f64;
            let mut count = 0usize;
            for off in &offsets {
                let mut j = [0usize; 3];
                let mut inside = true;
                for a in 0..grid.dim() {
                    let v = idx[a] as isize + off[a];
                    if v < 0 || v >= n {
                        inside = false;
                        break;
                    }
                    j[a] = v as usize;
                }
                if inside {
                    sum += abs[grid.flat_index(j)];
                    count += 1;
                }
            }
            let avg = sum / count as f64;
            if avg > out[flat] {
                out[flat] = avg;
            }
        }
    }
    Field::new(grid, out).expect("averages of finite values are finite")
}

/// `sup M[(K h)^{1/q}] / (K h)^{1/q}` over the grid, the ratio the
/// maximal-function bound controls for potentials, finite for every
/// nonzero `h >= 0` because the kernel is strictly positive.
pub fn potential_maximal_domination(
    h_field: &Field,
    q: f64,
    table: &KernelTable,
    radii: &RadiusSet,
) -> Result<f64> {
    if !h_field.nonneg() {
        return Err(CoreError::InvalidProblem("domination check needs h >= 0".into()));
    }
    if !(q > 0.0) {
        return Err(CoreError::InvalidProblem(format!("power q must be positive, got {q}")));
    }
    if h_field.max_value() <= 0.0 {
        return Err(CoreError::InvalidProblem(
            "domination check needs a nonzero field".into(),
        ));
    }
    let kh = table.convolve(h_field)?;
    let g = kh.map(|v| v.max(f64::MIN_POSITIVE).powf(1.0 / q))?;
    let m = local_maximal(&g, radii);
    let sup = m
        .values()
        .iter()
        .zip(g.values())
        .map(|(mv, gv)| mv / gv)
        .fold(0.0f64, f64::max);
    Ok(sup)
}
