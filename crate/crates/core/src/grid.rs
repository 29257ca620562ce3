//! Discretization substrate: uniform grids over the cube `[-L, L]^dim`,
//! scalar fields sampled at cell centers, boolean cell sets, and atomic
//! measures.
//!
//! The cube stands in for all of space; test functions are kept inside
//! `[-L/2, L/2]^dim` by convention so the truncation error stays below
//! solver tolerances. Grid points are cell centers, `x_i = -L + (i + 1/2) h`,
//! which keeps singular kernels away from exact lattice differences of zero.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Relative shrink applied to ball-membership radii so that cells sitting a
/// rounding error away from the boundary do not flip in or out of a ball.
const BALL_EDGE_SHRINK: f64 = 1e-12;

/// A uniform grid of cell centers covering `[-L, L]^dim`, `dim` in 1..=3.
///
/// `n` (points per axis) must be a power of two so spectral convolution can
/// zero-pad to `2n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    l: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, l: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(CoreError::InvalidGrid(format!("dim must be 1, 2, or 3, got {dim}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(CoreError::InvalidGrid(format!(
                "points per axis must be a power of two >= 2, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(CoreError::InvalidGrid(format!("half extent must be positive, got {l}")));
        }
        Ok(Grid { dim, n, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    /// Half extent `L`; the grid covers `[-L, L]^dim`.
    pub fn half_extent(&self) -> f64 {
        self.l
    }

    /// Cell spacing `h = 2L / n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// Volume of one cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of cell center `i` along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 0.5) * self.spacing()
    }

    /// Decompose a flat row-major index into per-axis indices.
    /// Unused axes are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    /// Flat row-major index of per-axis indices.
    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let mut flat = 0usize;
        for axis in 0..self.dim {
            flat = flat * self.n + idx[axis];
        }
        flat
    }

    /// Coordinates of the cell center with flat index `flat`.
    /// Unused axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut p = [0.0f64; 3];
        for axis in 0..self.dim {
            p[axis] = self.axis_coord(idx[axis]);
        }
        p
    }

    /// True when `p` lies in the closed cube `[-L, L]^dim`.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..self.dim).all(|a| p[a].abs() <= self.l)
    }

    /// A grid with the same extent and twice the resolution.
    pub fn refined(&self) -> Grid {
        Grid { dim: self.dim, n: self.n * 2, l: self.l }
    }
}

/// Squared Euclidean distance between two points of the first `dim` axes.
pub fn dist2(a: [f64; 3], b: [f64; 3], dim: usize) -> f64 {
    (0..dim).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// A real-valued function sampled at the cell centers of a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    nonneg: bool,
}

impl Field {
    /// Wrap raw values; rejects non-finite entries and length mismatches.
    /// The nonnegativity flag is detected from the data.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::InvalidGrid(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(CoreError::InvalidGrid("field contains non-finite values".into()));
        }
        let nonneg = values.iter().all(|&v| v >= 0.0);
        Ok(Field { grid, values, nonneg })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![0.0; grid.len()], nonneg: true }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field { grid, values: vec![c; grid.len()], nonneg: c >= 0.0 }
    }

    /// Sample a function of the cell-center coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Field::new(grid, values)
    }

    /// Indicator of a cell set (1 inside, 0 outside).
    pub fn indicator(set: &GridSet) -> Self {
        let values = set.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Field { grid: set.grid, values, nonneg: true }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.nonneg = false; // caller may write anything; re-detect on demand
        &mut self.values
    }

    pub fn nonneg(&self) -> bool {
        self.nonneg
    }

    /// Re-scan the values and update the nonnegativity flag.
    pub fn refresh_nonneg(&mut self) -> bool {
        self.nonneg = self.values.iter().all(|&v| v >= 0.0);
        self.nonneg
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise map; the flag is re-detected from the results.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise absolute value.
    pub fn abs(&self) -> Field {
        let values = self.values.iter().map(|v| v.abs()).collect();
        Field { grid: self.grid, values, nonneg: true }
    }

    pub fn scale(&self, c: f64) -> Field {
        let values = self.values.iter().map(|v| c * v).collect();
        Field { grid: self.grid, values, nonneg: self.nonneg && c >= 0.0 }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Field { grid: self.grid, values, nonneg: self.nonneg && other.nonneg })
    }

    /// Midpoint-rule integral over the cube, `h^dim * sum(values)`.
    pub fn integrate(&self) -> f64 {
        integrate(self)
    }
}

/// Midpoint quadrature of a field over `[-L, L]^dim`.
pub fn integrate(f: &Field) -> f64 {
    let sum: f64 = f.values.iter().sum();
    sum * f.grid.cell_volume()
}

/// A subset of grid cells, one boolean per cell center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSet {
    grid: Grid,
    mask: Vec<bool>,
}

impl GridSet {
    pub fn empty(grid: Grid) -> Self {
        GridSet { grid, mask: vec![false; grid.len()] }
    }

    pub fn full(grid: Grid) -> Self {
        GridSet { grid, mask: vec![true; grid.len()] }
    }

    pub fn from_mask(grid: Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(CoreError::InvalidGrid(format!(
                "mask has {} entries, grid has {} points",
                mask.len(),
                grid.len()
            )));
        }
        Ok(GridSet { grid, mask })
    }

    /// Cells whose centers satisfy the predicate.
    pub fn from_predicate(grid: Grid, pred: impl Fn([f64; 3]) -> bool) -> Self {
        let mask = (0..grid.len()).map(|i| pred(grid.point(i))).collect();
        GridSet { grid, mask }
    }

    /// Closed ball of radius `r` about `center` (cell-center membership,
    /// with a tiny shrink so exact-boundary ties are excluded).
    pub fn ball(grid: Grid, center: [f64; 3], r: f64) -> Self {
        let r2 = r * r * (1.0 - BALL_EDGE_SHRINK);
        GridSet::from_predicate(grid, |p| dist2(p, center, grid.dim()) <= r2)
    }

    /// Axis-aligned box `[lo_i, hi_i]` per axis (cell-center membership).
    pub fn boxset(grid: Grid, lo: [f64; 3], hi: [f64; 3]) -> Self {
        GridSet::from_predicate(grid, |p| (0..grid.dim()).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains_index(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    /// Lebesgue measure of the cell union, `count * h^dim`.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        Ok(GridSet { grid: self.grid, mask })
    }

    pub fn intersect(&self, other: &GridSet) -> Result<GridSet> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        Ok(GridSet { grid: self.grid, mask })
    }

    pub fn is_subset_of(&self, other: &GridSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }

    /// Pack the mask into 64-bit words (used as an exact cache key).
    pub fn packed_bits(&self) -> Vec<u64> {
        let mut words = vec![0u64; (self.mask.len() + 63) / 64];
        for (i, &b) in self.mask.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        words
    }

    /// The same set on a grid of doubled resolution (each cell splits into
    /// 2^dim children).
    pub fn refined(&self) -> GridSet {
        let fine = self.grid.refined();
        GridSet::from_predicate(fine, |p| {
            // locate the parent cell of p
            let h = self.grid.spacing();
            let mut idx = [0usize; 3];
            for a in 0..self.grid.dim() {
                let i = ((p[a] + self.grid.half_extent()) / h).floor() as isize;
                idx[a] = i.clamp(0, self.grid.points_per_axis() as isize - 1) as usize;
            }
            self.mask[self.grid.flat_index(idx)]
        })
    }
}

/// Strict superlevel set `{x : w(x) > t}`.
pub fn superlevel_set(w: &Field, t: f64) -> GridSet {
    let mask = w.values().iter().map(|&v| v > t).collect();
    GridSet { grid: w.grid(), mask }
}

/// A finite nonnegative atomic measure, `sum_i mass_i * delta(x - loc_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    support_diameter: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Atom {
    pub location: [f64; 3],
    pub mass: f64,
}

impl AtomicMeasure {
    /// Build from atoms; masses must be nonnegative and finite.
    /// The support diameter is the maximum pairwise atom distance
    /// (zero for at most one atom).
    pub fn new(atoms: Vec<Atom>, dim: usize) -> Result<Self> {
        for a in &atoms {
            if !(a.mass.is_finite() && a.mass >= 0.0) {
                return Err(CoreError::InvalidProblem(format!("atom mass {} invalid", a.mass)));
            }
            if !a.location.iter().all(|c| c.is_finite()) {
                return Err(CoreError::InvalidProblem("atom location not finite".into()));
            }
        }
        let mut diam2 = 0.0f64;
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                diam2 = diam2.max(dist2(atoms[i].location, atoms[j].location, dim));
            }
        }
        Ok(AtomicMeasure { atoms, support_diameter: diam2.sqrt() })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn support_diameter(&self) -> f64 {
        self.support_diameter
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.mass == 0.0)
    }

    pub fn scaled(&self, c: f64) -> AtomicMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { location: a.location, mass: c * a.mass })
            .collect();
        AtomicMeasure { atoms, support_diameter: self.support_diameter }
    }

    /// Total mass carried by cells of `set` (atoms binned to their cell).
    pub fn mass_on(&self, set: &GridSet) -> f64 {
        let grid = set.grid();
        let h = grid.spacing();
        self.atoms
            .iter()
            .filter(|a| {
                if !grid.contains(a.location) {
                    return false;
                }
                let mut idx = [0usize; 3];
                for ax in 0..grid.dim() {
                    let i = ((a.location[ax] + grid.half_extent()) / h).floor() as isize;
                    idx[ax] = i.clamp(0, grid.points_per_axis() as isize - 1) as usize;
                }
                set.contains_index(grid.flat_index(idx))
            })
            .map(|a| a.mass)
            .sum()
    }
}

/// A covering of the grid cube by balls of unit diameter.
#[derive(Debug, Clone)]
pub struct BallCover {
    pub balls: Vec<GridSet>,
    pub centers: Vec<[f64; 3]>,
    /// Maximum number of cover balls containing any single grid point.
    pub multiplicity: usize,
}

/// Cover `[-L, L]^dim` by balls of diameter 1 centered on a lattice of
/// pitch `1 / (2 sqrt(dim))`. The pitch guarantees every point of the cube
/// lies within 1/4 of a center, so the cover has slack, and the achieved
/// multiplicity is bounded by a dimension-only constant.
pub fn unit_ball_cover(grid: Grid) -> Result<BallCover> {
    let h = grid.spacing();
    if h >= 0.25 {
        return Err(CoreError::GridTooCoarse { h });
    }
    let dim = grid.dim();
    let pitch = 0.5 / (dim as f64).sqrt();
    let r = 0.5f64;
    // lattice indices covering [-L - r, L + r] per axis
    let m = ((grid.half_extent() + r) / pitch).ceil() as isize;
    let range: Vec<isize> = (-m..=m).collect();

    let mut balls = Vec::new();
    let mut centers = Vec::new();
    let mut push = |c: [f64; 3]| {
        let ball = GridSet::ball(grid, c, r);
        if !ball.is_empty() {
            balls.push(ball);
            centers.push(c);
        }
    };
    match dim {
        1 => {
            for &i in &range {
                push([i as f64 * pitch, 0.0, 0.0]);
            }
        }
        2 => {
            for &i in &range {
                for &j in &range {
                    push([i as f64 * pitch, j as f64 * pitch, 0.0]);
                }
            }
        }
        _ => {
            for &i in &range {
                for &j in &range {
                    for &k in &range {
                        push([i as f64 * pitch, j as f64 * pitch, k as f64 * pitch]);
                    }
                }
            }
        }
    }

    let mut counts = vec![0usize; grid.len()];
    for ball in &balls {
        for (i, &b) in ball.mask().iter().enumerate() {
            if b {
                counts[i] += 1;
            }
        }
    }
    let multiplicity = counts.iter().cloned().max().unwrap_or(0);
    debug_assert!(counts.iter().all(|&c| c >= 1), "cover misses a grid point");

    Ok(BallCover { balls, centers, multiplicity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, l: f64) -> Grid {
        Grid::new(1, n, l).unwrap()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(Grid::new(0, 8, 1.0).is_err());
        assert!(Grid::new(4, 8, 1.0).is_err());
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 8, 0.0).is_err());
        assert!(Grid::new(2, 8, f64::NAN).is_err());
    }

    #[test]
    fn cell_centers_are_offset_from_the_boundary() {
        let g = grid1(8, 1.0);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.axis_coord(0), -0.875);
        assert_eq!(g.axis_coord(7), 0.875);
    }

    #[test]
    fn integrate_constant_and_zero() {
        let g = grid1(8, 1.0);
        assert_eq!(integrate(&Field::constant(g, 1.0)), 2.0);
        assert_eq!(integrate(&Field::zeros(g)), 0.0);
    }

    #[test]
    fn integrate_quadratic_matches_closed_form() {
        let g = grid1(1024, 1.0);
        let f = Field::from_fn(g, |p| p[0] * p[0]).unwrap();
        assert!((integrate(&f) - 2.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn integrate_is_monotone() {
        let g = grid1(16, 1.0);
        let f = Field::from_fn(g, |p| p[0].cos()).unwrap();
        let gfield = Field::from_fn(g, |p| p[0].cos() + 0.5).unwrap();
        assert!(integrate(&f) <= integrate(&gfield));
    }

    #[test]
    fn superlevel_trivial_cases() {
        let g = grid1(8, 1.0);
        let w = Field::constant(g, 1.0);
        assert!(superlevel_set(&w, 2.0).is_empty());
        assert_eq!(superlevel_set(&w, 0.5).count(), 8);
    }

    #[test]
    fn superlevel_of_abs_x_has_expected_measure() {
        let g = grid1(256, 1.0);
        let w = Field::from_fn(g, |p| p[0].abs()).unwrap();
        let s = superlevel_set(&w, 0.5);
        assert!((s.measure() - 1.0).abs() <= g.spacing());
    }

    #[test]
    fn superlevel_is_antitone_in_threshold() {
        let g = grid1(64, 1.0);
        let w = Field::from_fn(g, |p| (1.0 - p[0] * p[0]).max(0.0)).unwrap();
        let a = superlevel_set(&w, 0.3);
        let b = superlevel_set(&w, 0.7);
        assert!(b.is_subset_of(&a));
    }

    #[test]
    fn ball_cover_dim1_has_enough_intervals() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        let cover = unit_ball_cover(g).unwrap();
        assert!(cover.balls.len() >= 4);
        // covering: every point in at least one ball
        let mut hit = vec![false; g.len()];
        for b in &cover.balls {
            for (i, &m) in b.mask().iter().enumerate() {
                hit[i] |= m;
            }
        }
        assert!(hit.iter().all(|&x| x));
    }

    #[test]
    fn ball_cover_dim2_multiplicity_bounded() {
        let g = Grid::new(2, 64, 1.0).unwrap();
        let cover = unit_ball_cover(g).unwrap();
        assert!(cover.multiplicity <= 7, "multiplicity {}", cover.multiplicity);
        assert!(cover.multiplicity >= 1);
    }

    #[test]
    fn ball_cover_rejects_coarse_grid() {
        let g = Grid::new(1, 8, 4.0).unwrap(); // h = 1
        assert!(matches!(unit_ball_cover(g), Err(CoreError::GridTooCoarse { .. })));
    }

    #[test]
    fn atomic_measure_diameter_is_max_pairwise_distance() {
        let atoms = vec![
            Atom { location: [0.0, 0.0, 0.0], mass: 1.0 },
            Atom { location: [0.3, 0.0, 0.0], mass: 2.0 },
            Atom { location: [0.1, 0.0, 0.0], mass: 0.5 },
        ];
        let mu = AtomicMeasure::new(atoms, 1).unwrap();
        assert!((mu.support_diameter() - 0.3).abs() < 1e-15);
        assert!((mu.total_mass() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn atomic_measure_rejects_negative_mass() {
        let atoms = vec![Atom { location: [0.0; 3], mass: -1.0 }];
        assert!(AtomicMeasure::new(atoms, 1).is_err());
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = grid1(8, 1.0);
        assert!(Field::new(g, vec![f64::NAN; 8]).is_err());
        assert!(Field::new(g, vec![0.0; 4]).is_err());
    }

    #[test]
    fn refined_set_preserves_measure() {
        let g = grid1(64, 2.0);
        let s = GridSet::ball(g, [0.25, 0.0, 0.0], 0.5);
        let r = s.refined();
        assert!((s.measure() - r.measure()).abs() < 1e-12);
    }
}
