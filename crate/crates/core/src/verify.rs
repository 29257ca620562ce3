//! Inequality verification harness: seeded test families, two-sided
//! evaluation of each capacitary inequality, and reports carrying observed
//! constants with refinement-stability metadata.
//!
//! Observed constants are reported, never asserted against theoretical
//! values: the inequalities hold with unspecified constants, so the
//! falsifiable content is finiteness of the worst ratio and its stability
//! under grid refinement. Runs are deterministic given the seed: every
//! sample draws from its own counter-derived ChaCha stream, and parallel
//! sweeps merge by sample index.

use crate::capacity::{
    capacity, quasi_additivity_ratio, CapCache, CapacityProblem,
};
use crate::choquet::{choquet_integral, choquet_of_power, ChoquetConfig};
use crate::error::{CoreError, Result};
use crate::functionals::{beta_witness_from_choquet, kv_upper, BetaWitnessOptions};
use crate::grid::{unit_ball_cover, Atom, AtomicMeasure, Field, Grid, GridSet};
use crate::kernel::{check_two_sided, KernelKind, KernelSpec, KernelTable};
use crate::maximal::{local_maximal, RadiusSet};
use crate::solver::SolveOptions;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The inequalities the harness can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    Mazya,
    Capstrong,
    Gfl1c,
    Thm12Band,
    Lemma31Bessel,
    VwhRiesz,
    Thm13Maximal,
    QuasiAdd,
    TwoSidedKernel,
    MvnChain,
}

impl InequalityId {
    pub fn as_str(&self) -> &'static str {
        match self {
            InequalityId::Mazya => "mazya",
            InequalityId::Capstrong => "capstrong",
            InequalityId::Gfl1c => "gfl1c",
            InequalityId::Thm12Band => "thm12_band",
            InequalityId::Lemma31Bessel => "lemma31_bessel",
            InequalityId::VwhRiesz => "vwh_riesz",
            InequalityId::Thm13Maximal => "thm13_maximal",
            InequalityId::QuasiAdd => "quasi_add",
            InequalityId::TwoSidedKernel => "two_sided_kernel",
            InequalityId::MvnChain => "mvn_chain",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "mazya" => InequalityId::Mazya,
            "capstrong" => InequalityId::Capstrong,
            "gfl1c" => InequalityId::Gfl1c,
            "thm12_band" | "thm12" => InequalityId::Thm12Band,
            "lemma31_bessel" | "lemma31" => InequalityId::Lemma31Bessel,
            "vwh_riesz" | "vwh" => InequalityId::VwhRiesz,
            "thm13_maximal" | "thm13" => InequalityId::Thm13Maximal,
            "quasi_add" | "quasiadd" => InequalityId::QuasiAdd,
            "two_sided_kernel" | "two_sided" => InequalityId::TwoSidedKernel,
            "mvn_chain" | "mvn" => InequalityId::MvnChain,
            _ => return None,
        })
    }

    pub fn all() -> &'static [InequalityId] {
        &[
            InequalityId::Mazya,
            InequalityId::Capstrong,
            InequalityId::Gfl1c,
            InequalityId::Thm12Band,
            InequalityId::Lemma31Bessel,
            InequalityId::VwhRiesz,
            InequalityId::Thm13Maximal,
            InequalityId::QuasiAdd,
            InequalityId::TwoSidedKernel,
            InequalityId::MvnChain,
        ]
    }
}

/// Everything one harness run depends on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HarnessParams {
    pub spec: KernelSpec,
    pub s: f64,
    pub q: Option<f64>,
    pub n: usize,
    pub l: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Choquet level range; deep `k_min` costs nothing extra because all
    /// levels below the field minimum share the full-grid mask in the cache.
    pub k_min: i32,
    pub k_max: i32,
    pub levels_per_octave: u32,
}

impl HarnessParams {
    pub fn new(spec: KernelSpec, s: f64) -> Self {
        HarnessParams {
            spec,
            s,
            q: None,
            n: 256,
            l: 4.0,
            tol: 1e-3,
            max_iters: 80_000,
            seed: 42,
            k_min: -24,
            k_max: 8,
            levels_per_octave: 1,
        }
    }

    pub fn choquet_config(&self) -> ChoquetConfig {
        ChoquetConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            levels_per_octave: self.levels_per_octave,
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iters: self.max_iters }
    }
}

/// Seeded sample family descriptor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Sums of 1..=5 Gaussian bumps with dyadic amplitudes.
    BumpSum,
    /// Two bumps pushed far apart (support is not contained in any unit ball).
    WideBumpPair,
    /// Indicators of unions of 1..=3 balls/boxes.
    IndicatorUnion,
    /// Primal optimal densities of random ball capacities, recycled as inputs.
    CapacitaryDensity,
    /// Atomic measures with support diameter in (0.2, 0.9), centered so the
    /// support sits inside the ball of radius 1/2 about the origin.
    AtomCloud,
    /// Unions of components scattered across the whole domain.
    ScatteredSets,
}

impl TestFamily {
    fn rng(&self, index: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(
            self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        )
    }
}

fn gen_bump_sum(rng: &mut ChaCha8Rng, grid: Grid, spread: f64) -> Field {
    let bumps = rng.gen_range(1..=5usize);
    let dim = grid.dim();
    let mut specs = Vec::with_capacity(bumps);
    for _ in 0..bumps {
        let amp = (rng.gen_range(-2..=4i32) as f64).exp2();
        let mut center = [0.0f64; 3];
        for c in center.iter_mut().take(dim) {
            *c = rng.gen_range(-spread..spread);
        }
        let sigma: f64 = rng.gen_range(0.15..0.4);
        specs.push((amp, center, sigma));
    }
    let values = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            specs
                .iter()
                .map(|(amp, c, sigma)| {
                    let d2: f64 = (0..dim).map(|a| (p[a] - c[a]) * (p[a] - c[a])).sum();
                    amp * (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
        .collect();
    Field::new(grid, values).expect("gaussian sums are finite")
}

fn gen_wide_bump_pair(rng: &mut ChaCha8Rng, grid: Grid) -> Field {
    let dim = grid.dim();
    let l = grid.half_extent();
    let far = (l - 1.4).max(1.2);
    let mut specs = Vec::new();
    for side in [-1.0f64, 1.0] {
        let amp = (rng.gen_range(-1..=3i32) as f64).exp2();
        let mut center = [0.0f64; 3];
        center[0] = side * rng.gen_range(1.2..far.max(1.21));
        for c in center.iter_mut().take(dim).skip(1) {
            *c = rng.gen_range(-0.8..0.8);
        }
        let sigma: f64 = rng.gen_range(0.15..0.35);
        specs.push((amp, center, sigma));
    }
    let values = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            specs
                .iter()
                .map(|(amp, c, sigma)| {
                    let d2: f64 = (0..dim).map(|a| (p[a] - c[a]) * (p[a] - c[a])).sum();
                    amp * (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
        .collect();
    Field::new(grid, values).expect("gaussian sums are finite")
}

fn gen_indicator_union(rng: &mut ChaCha8Rng, grid: Grid, spread: f64) -> GridSet {
    let pieces = rng.gen_range(1..=3usize);
    let dim = grid.dim();
    let mut set = GridSet::empty(grid);
    for _ in 0..pieces {
        let mut center = [0.0f64; 3];
        for c in center.iter_mut().take(dim) {
            *c = rng.gen_range(-spread..spread);
        }
        let piece = if rng.gen::<bool>() {
            GridSet::ball(grid, center, rng.gen_range(0.15..0.45))
        } else {
            let mut lo = [0.0f64; 3];
            let mut hi = [0.0f64; 3];
            for a in 0..dim {
                let half = rng.gen_range(0.1..0.4);
                lo[a] = center[a] - half;
                hi[a] = center[a] + half;
            }
            GridSet::boxset(grid, lo, hi)
        };
        set = set.union(&piece).expect("same grid");
    }
    set
}

fn gen_scattered_set(rng: &mut ChaCha8Rng, grid: Grid) -> GridSet {
    let pieces = rng.gen_range(2..=4usize);
    let dim = grid.dim();
    let reach = grid.half_extent() - 1.4;
    let mut set = GridSet::empty(grid);
    for _ in 0..pieces {
        let mut center = [0.0f64; 3];
        for c in center.iter_mut().take(dim) {
            *c = rng.gen_range(-reach..reach);
        }
        set = set
            .union(&GridSet::ball(grid, center, rng.gen_range(0.2..0.4)))
            .expect("same grid");
    }
    set
}

fn gen_atom_cloud(rng: &mut ChaCha8Rng, dim: usize) -> AtomicMeasure {
    let atoms = rng.gen_range(1..=4usize);
    let mut list = Vec::with_capacity(atoms);
    let mut dir = [0.0f64; 3];
    if atoms == 1 {
        for d in dir.iter_mut().take(dim) {
            *d = rng.gen_range(-0.1..0.1);
        }
        list.push(Atom { location: dir, mass: rng.gen_range(0.25..2.0) });
    } else {
        let diameter: f64 = rng.gen_range(0.2..0.9);
        // unit direction
        let mut norm = 0.0;
        for d in dir.iter_mut().take(dim) {
            *d = rng.gen_range(-1.0..1.0f64);
            norm += *d * *d;
        }
        let norm = norm.sqrt().max(1e-9);
        for d in dir.iter_mut().take(dim) {
            *d /= norm;
        }
        // two atoms realize the diameter, the rest land inside
        for side in [-0.5f64, 0.5] {
            let mut loc = [0.0f64; 3];
            for a in 0..dim {
                loc[a] = side * diameter * dir[a];
            }
            list.push(Atom { location: loc, mass: rng.gen_range(0.25..2.0) });
        }
        for _ in 2..atoms {
            let mut loc = [0.0f64; 3];
            let mut n2 = 0.0;
            for l in loc.iter_mut().take(dim) {
                *l = rng.gen_range(-1.0..1.0f64);
                n2 += *l * *l;
            }
            let scale = rng.gen_range(0.0..(diameter / 2.0)) / n2.sqrt().max(1e-9);
            for l in loc.iter_mut().take(dim) {
                *l *= scale;
            }
            list.push(Atom { location: loc, mass: rng.gen_range(0.25..2.0) });
        }
    }
    AtomicMeasure::new(list, dim).expect("atoms are finite")
}

/// One evaluated sample of an inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Extra per-sample scalar (minimum pointwise ratio, witness rescale
    /// constant, chain value; inequality dependent).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Refinement {
    pub coarse_n: usize,
    pub fine_n: usize,
    pub coarse_constant: f64,
    pub fine_constant: f64,
    /// `|fine/coarse - 1|`.
    pub drift: f64,
}

/// Report for one inequality at one parameter point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality_id: InequalityId,
    pub params: HarnessParams,
    pub family: Option<TestFamily>,
    pub per_sample: Vec<SampleRecord>,
    pub observed_constant: f64,
    pub skipped: usize,
    pub total: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub skip_reasons: Vec<String>,
    /// `[min, max]` of the per-sample ratios (reported for the band-style
    /// inequalities).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<Refinement>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl InequalityReport {
    fn from_outcomes(
        id: InequalityId,
        params: HarnessParams,
        family: Option<TestFamily>,
        outcomes: Vec<SampleOutcome>,
    ) -> Self {
        let total = outcomes.len();
        let mut per_sample = Vec::new();
        let mut skip_reasons = Vec::new();
        for o in outcomes {
            match o {
                SampleOutcome::Record(r) => per_sample.push(r),
                SampleOutcome::Skip { id, reason } => {
                    skip_reasons.push(format!("sample {id}: {reason}"))
                }
            }
        }
        let observed =
            per_sample.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
        let band = if per_sample.is_empty() {
            None
        } else {
            let lo = per_sample.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
            Some((lo, observed))
        };
        InequalityReport {
            inequality_id: id,
            params,
            family,
            observed_constant: observed,
            skipped: skip_reasons.len(),
            total,
            skip_reasons,
            per_sample,
            band,
            multiplicity: None,
            refinement: None,
            notes: Vec::new(),
        }
    }

    /// A run fails its skip budget when more than 10% of samples skip.
    pub fn skip_budget_ok(&self) -> bool {
        self.skipped * 10 <= self.total
    }

    /// Any sample flagged for witness quality?
    pub fn has_witness_quality_failure(&self) -> bool {
        self.per_sample
            .iter()
            .any(|r| r.flag.as_deref() == Some("witness_quality"))
            || self.skip_reasons.iter().any(|r| r.contains("witness_quality"))
    }
}

enum SampleOutcome {
    Record(SampleRecord),
    Skip { id: usize, reason: String },
}

/// A harness bound to one grid/kernel/parameter point.
pub struct Harness {
    pub params: HarnessParams,
    pub grid: Grid,
    pub table: KernelTable,
    pub cache: CapCache,
}

impl Harness {
    pub fn new(params: HarnessParams) -> Result<Self> {
        Self::with_cache(params, CapCache::new())
    }

    pub fn with_cache(params: HarnessParams, cache: CapCache) -> Result<Self> {
        let grid = Grid::new(params.spec.dim, params.n, params.l)?;
        if !(params.s > 1.0) {
            return Err(CoreError::InvalidProblem(format!(
                "exponent s must be > 1, got {}",
                params.s
            )));
        }
        let n = params.spec.dim as f64;
        if params.spec.kind == KernelKind::Bessel && params.spec.alpha * params.s > n {
            return Err(CoreError::InvalidProblem(format!(
                "Bessel capacity requires alpha > 0 and s > 1 with alpha * s <= dim; \
                 got alpha * s = {}",
                params.spec.alpha * params.s
            )));
        }
        let table = KernelTable::build(params.spec, grid)?;
        Ok(Harness { params, grid, table, cache })
    }

    fn bump_spread(&self) -> f64 {
        (self.params.l / 4.0).max(0.6)
    }

    /// Deterministic field sample of a family.
    pub fn sample_field(&self, family: &TestFamily, index: usize) -> Result<Field> {
        let mut rng = family.rng(index);
        Ok(match family.kind {
            FamilyKind::BumpSum => gen_bump_sum(&mut rng, self.grid, self.bump_spread()),
            FamilyKind::WideBumpPair => gen_wide_bump_pair(&mut rng, self.grid),
            FamilyKind::CapacitaryDensity => {
                let set = gen_indicator_union(&mut rng, self.grid, self.bump_spread());
                let problem =
                    CapacityProblem::new(self.params.spec, self.grid, set, self.params.s)?;
                capacity(&problem, &self.table, &self.params.solve_options())?.f_star
            }
            FamilyKind::IndicatorUnion => {
                Field::indicator(&gen_indicator_union(&mut rng, self.grid, self.bump_spread()))
            }
            FamilyKind::AtomCloud | FamilyKind::ScatteredSets => {
                return Err(CoreError::InvalidProblem(
                    "family does not generate fields".into(),
                ))
            }
        })
    }

    pub fn sample_set(&self, family: &TestFamily, index: usize) -> Result<GridSet> {
        let mut rng = family.rng(index);
        Ok(match family.kind {
            FamilyKind::IndicatorUnion => {
                gen_indicator_union(&mut rng, self.grid, self.bump_spread())
            }
            FamilyKind::ScatteredSets => gen_scattered_set(&mut rng, self.grid),
            _ => {
                return Err(CoreError::InvalidProblem(
                    "family does not generate sets".into(),
                ))
            }
        })
    }

    pub fn sample_measure(&self, family: &TestFamily, index: usize) -> Result<AtomicMeasure> {
        if family.kind != FamilyKind::AtomCloud {
            return Err(CoreError::InvalidProblem("family does not generate measures".into()));
        }
        let mut rng = family.rng(index);
        Ok(gen_atom_cloud(&mut rng, self.grid.dim()))
    }

    fn sweep(
        &self,
        family: &TestFamily,
        eval: impl Fn(usize) -> Result<Option<SampleRecord>> + Sync,
    ) -> Vec<SampleOutcome> {
        (0..family.count)
            .into_par_iter()
            .map(|i| match eval(i) {
                Ok(Some(record)) => SampleOutcome::Record(record),
                Ok(None) => SampleOutcome::Skip { id: i, reason: "degenerate sample".into() },
                Err(CoreError::WitnessQuality { c }) => SampleOutcome::Skip {
                    id: i,
                    reason: format!("witness_quality: rescale constant {c:.3}"),
                },
                Err(e) => SampleOutcome::Skip { id: i, reason: format!("solver: {e}") },
            })
            .collect()
    }

    /// `int (K f)^s dCap <= A int f^s dx`.
    pub fn verify_mazya(&self, family: &TestFamily) -> Result<InequalityReport> {
        let cfg = self.params.choquet_config();
        let outcomes = self.sweep(family, |i| {
            let f = self.sample_field(family, i)?;
            let rhs = f.map(|v| v.powf(self.params.s))?.integrate();
            if rhs <= 0.0 {
                return Ok(None);
            }
            let potential = self.table.convolve(&f)?;
            let lhs = choquet_of_power(
                &potential,
                self.params.s,
                &self.table,
                self.params.s,
                &cfg,
                &self.cache,
            )?
            .value;
            Ok(Some(SampleRecord { id: i, lhs, rhs, ratio: lhs / rhs, aux: None, flag: None }))
        });
        Ok(InequalityReport::from_outcomes(
            InequalityId::Mazya,
            self.params,
            Some(*family),
            outcomes,
        ))
    }

    /// `int (K f) dCap <= A int f^s (K f)^{1-s} dx`.
    pub fn verify_capstrong(&self, family: &TestFamily) -> Result<InequalityReport> {
        let cfg = self.params.choquet_config();
        let outcomes = self.sweep(family, |i| {
            let f = self.sample_field(family, i)?;
            self.capstrong_record(i, &f, &cfg)
        });
        Ok(InequalityReport::from_outcomes(
            InequalityId::Capstrong,
            self.params,
            Some(*family),
            outcomes,
        ))
    }

    fn capstrong_record(
        &self,
        i: usize,
        f: &Field,
        cfg: &ChoquetConfig,
    ) -> Result<Option<SampleRecord>> {
        let potential = self.table.convolve(f)?;
        let rhs = self.capstrong_rhs(f, &potential);
        if rhs <= 0.0 {
            return Ok(None);
        }
        let lhs =
            choquet_integral(&potential, &self.table, self.params.s, cfg, &self.cache)?.value;
        Ok(Some(SampleRecord { id: i, lhs, rhs, ratio: lhs / rhs, aux: None, flag: None }))
    }

    /// `int f^s (K f)^{1-s} dx`, the right-hand side shared by several
    /// inequalities (feasibility is automatic at the field's own potential).
    pub fn capstrong_rhs(&self, f: &Field, potential: &Field) -> f64 {
        let s = self.params.s;
        let vol = self.grid.cell_volume();
        f.values()
            .iter()
            .zip(potential.values())
            .filter(|(&fv, _)| fv > 0.0)
            .map(|(&fv, &kv)| fv.powf(s) * kv.max(1e-300).powf(1.0 - s))
            .sum::<f64>()
            * vol
    }

    /// Both capstrong ratios for `f` and `2 f`; the inequality is
    /// degree-one homogeneous so the ratios agree up to the level-range
    /// truncation tail.
    pub fn capstrong_scaling_pair(
        &self,
        family: &TestFamily,
        index: usize,
    ) -> Result<(f64, f64)> {
        let cfg = self.params.choquet_config();
        let f = self.sample_field(family, index)?;
        let one = self
            .capstrong_record(index, &f, &cfg)?
            .ok_or_else(|| CoreError::InvalidProblem("degenerate sample".into()))?;
        let two = self
            .capstrong_record(index, &f.scale(2.0), &cfg)?
            .ok_or_else(|| CoreError::InvalidProblem("degenerate sample".into()))?;
        Ok((one.ratio, two.ratio))
    }

    /// Surrogate form of `int K f dCap <= A |f|_{Koethe dual}`, with the KV
    /// upper bound standing in for the dual norm.
    pub fn verify_gfl1c(&self, family: &TestFamily) -> Result<InequalityReport> {
        let cfg = self.params.choquet_config();
        let outcomes = self.sweep(family, |i| {
            let f = self.sample_field(family, i)?;
            let kv = kv_upper(&f, &self.table, self.params.s)?.value;
            if kv <= 0.0 {
                return Ok(None);
            }
            let potential = self.table.convolve(&f)?;
            let lhs =
                choquet_integral(&potential, &self.table, self.params.s, &cfg, &self.cache)?
                    .value;
            Ok(Some(SampleRecord { id: i, lhs, rhs: kv, ratio: lhs / kv, aux: None, flag: None }))
        });
        let mut report = InequalityReport::from_outcomes(
            InequalityId::Gfl1c,
            self.params,
            Some(*family),
            outcomes,
        );
        report.notes.push(
            "surrogate: the Koethe-dual norm is replaced by its KV upper bound".into(),
        );
        Ok(report)
    }

    /// Surrogate chain `kv_upper(f) <= int f^s (K f)^{1-s} dx` (the dual
    /// norm bound evaluated through its defining candidates; ratio <= 1 by
    /// construction since h = |f| is always a candidate).
    pub fn verify_mvn_chain(&self, family: &TestFamily) -> Result<InequalityReport> {
        let outcomes = self.sweep(family, |i| {
            let f = self.sample_field(family, i)?;
            let potential = self.table.convolve(&f)?;
            let rhs = self.capstrong_rhs(&f, &potential);
            if rhs <= 0.0 {
                return Ok(None);
            }
            let lhs = kv_upper(&f, &self.table, self.params.s)?.value;
            Ok(Some(SampleRecord { id: i, lhs, rhs, ratio: lhs / rhs, aux: None, flag: None }))
        });
        let mut report = InequalityReport::from_outcomes(
            InequalityId::MvnChain,
            self.params,
            Some(*family),
            outcomes,
        );
        report
            .notes
            .push("chain surrogate: ratios are <= 1 because h = |f| is a KV candidate".into());
        Ok(report)
    }

    /// Two-sided band `C(u) vs beta-witness(u)`, plus the indicator
    /// subfamily `beta(chi_E) vs Cap(E)`.
    pub fn verify_thm12(
        &self,
        family: &TestFamily,
        indicator_count: usize,
    ) -> Result<InequalityReport> {
        let cfg = self.params.choquet_config();
        let wopts = BetaWitnessOptions {
            k_min: self.params.k_min.max(-12),
            k_max: self.params.k_max,
            solve: self.params.solve_options(),
            polish_steps: 0,
        };
        let outcomes = self.sweep(family, |i| {
            let u = self.sample_field(family, i)?;
            if u.max_value() <= 0.0 {
                return Ok(None);
            }
            let c_val =
                choquet_integral(&u, &self.table, self.params.s, &cfg, &self.cache)?.value;
            if c_val <= 0.0 {
                return Ok(None);
            }
            let beta = beta_witness_from_choquet(&u, &self.table, self.params.s, &wopts)?;
            let rescale = beta.rescale_constant.unwrap_or(1.0);
            // lower direction through the strong type inequality applied to
            // the witness: C(u) <= choquet(K w) <= A1 * beta(u), where the
            // first step is level-set monotonicity (K w dominates u)
            let mut flag = None;
            if let Some(crate::functionals::Witness::Density(w)) = &beta.witness {
                let kw = self.table.convolve(w)?;
                let cw = choquet_integral(&kw, &self.table, self.params.s, &cfg, &self.cache)?
                    .value;
                if c_val > cw * (1.0 + 5.0 * self.params.tol) {
                    flag = Some(format!("chain_violation: C {c_val} > choquet(Kw) {cw}"));
                }
            }
            Ok(Some(SampleRecord {
                id: i,
                lhs: beta.value,
                rhs: c_val,
                ratio: beta.value / c_val,
                aux: Some(rescale),
                flag,
            }))
        });
        let mut report = InequalityReport::from_outcomes(
            InequalityId::Thm12Band,
            self.params,
            Some(*family),
            outcomes,
        );

        // indicator subfamily: beta(chi_E) against Cap(E)
        let ind_family = TestFamily {
            kind: FamilyKind::IndicatorUnion,
            count: indicator_count,
            seed: family.seed ^ 0x1234_5678,
        };
        let ind_outcomes = self.sweep(&ind_family, |i| {
            let set = self.sample_set(&ind_family, i)?;
            if set.is_empty() {
                return Ok(None);
            }
            let cap = self
                .cache
                .capacity_value(&self.table, &set, self.params.s, &self.params.solve_options())?
                .value;
            if cap <= 0.0 {
                return Ok(None);
            }
            let beta = beta_witness_from_choquet(
                &Field::indicator(&set),
                &self.table,
                self.params.s,
                &wopts,
            )?;
            Ok(Some(SampleRecord {
                id: family.count + i,
                lhs: beta.value,
                rhs: cap,
                ratio: beta.value / cap,
                aux: beta.rescale_constant,
                flag: Some("indicator".into()),
            }))
        });
        let ind_report = InequalityReport::from_outcomes(
            InequalityId::Thm12Band,
            self.params,
            Some(ind_family),
            ind_outcomes,
        );
        report.total += ind_report.total;
        report.skipped += ind_report.skipped;
        report.skip_reasons.extend(ind_report.skip_reasons);
        report.per_sample.extend(ind_report.per_sample);
        report.observed_constant =
            report.per_sample.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
        report.notes.push(format!(
            "max witness rescale constant {:.3}",
            report
                .per_sample
                .iter()
                .filter_map(|r| r.aux)
                .fold(0.0f64, f64::max)
        ));
        Ok(report)
    }

    fn pointwise_bound_extremes(&self, f: &Field) -> Result<(f64, f64)> {
        let s = self.params.s;
        let kf = self.table.convolve(f)?;
        let inner: Vec<f64> = f
            .values()
            .iter()
            .zip(kf.values())
            .map(|(&fv, &kv)| if fv > 0.0 { fv * kv.max(1e-300).powf(s - 1.0) } else { 0.0 })
            .collect();
        let denom = self.table.convolve(&Field::new(self.grid, inner)?)?;
        let mut sup = 0.0f64;
        let mut inf = f64::INFINITY;
        for (&kv, &dv) in kf.values().iter().zip(denom.values()) {
            if dv <= 0.0 {
                continue;
            }
            let ratio = kv.powf(s) / dv;
            sup = sup.max(ratio);
            inf = inf.min(ratio);
        }
        Ok((sup, inf))
    }

    /// Pointwise bound `(K f)^s <= A K[f (K f)^{s-1}]` for the potential
    /// density of a compactly supported measure (Bessel mode).
    pub fn verify_lemma31(&self, family: &TestFamily) -> Result<InequalityReport> {
        if self.params.spec.kind != KernelKind::Bessel {
            return Err(CoreError::InvalidProblem("lemma31 runs in Bessel mode".into()));
        }
        let s_conj = self.params.s / (self.params.s - 1.0);
        let outcomes = self.sweep(family, |i| {
            let mu = self.sample_measure(family, i)?;
            if mu.is_zero() {
                return Ok(None);
            }
            let k_mu = self.table.convolve_measure(&mu)?;
            let f = k_mu.map(|v| v.max(1e-300).powf(s_conj - 1.0))?;
            let (sup, inf) = self.pointwise_bound_extremes(&f)?;
            Ok(Some(SampleRecord {
                id: i,
                lhs: sup,
                rhs: 1.0,
                ratio: sup,
                aux: Some(inf),
                flag: None,
            }))
        });
        let mut report = InequalityReport::from_outcomes(
            InequalityId::Lemma31Bessel,
            self.params,
            Some(*family),
            outcomes,
        );
        report.notes.push(
            "aux holds the pointwise minimum: two-sidedness is not claimed".into(),
        );
        Ok(report)
    }

    /// Mass-scaling invariance of the lemma31 ratio: both sides scale by
    /// the same power of the measure's mass.
    pub fn lemma31_mass_scaling(&self, family: &TestFamily, index: usize) -> Result<(f64, f64)> {
        let s_conj = self.params.s / (self.params.s - 1.0);
        let mu = self.sample_measure(family, index)?;
        let mut sups = [0.0f64; 2];
        for (slot, scale) in [(0usize, 1.0f64), (1, 2.0)] {
            let k_mu = self.table.convolve_measure(&mu.scaled(scale))?;
            let f = k_mu.map(|v| v.max(1e-300).powf(s_conj - 1.0))?;
            let (sup, _) = self.pointwise_bound_extremes(&f)?;
            sups[slot] = sup;
        }
        Ok((sups[0], sups[1]))
    }

    /// Riesz-mode pointwise bound with no support restriction.
    pub fn verify_vwh_riesz(&self, family: &TestFamily) -> Result<InequalityReport> {
        if self.params.spec.kind != KernelKind::Riesz {
            return Err(CoreError::InvalidProblem("vwh runs in Riesz mode".into()));
        }
        let outcomes = self.sweep(family, |i| {
            let f = self.sample_field(family, i)?;
            if f.max_value() <= 0.0 {
                return Ok(None);
            }
            let (sup, inf) = self.pointwise_bound_extremes(&f)?;
            Ok(Some(SampleRecord {
                id: i,
                lhs: sup,
                rhs: 1.0,
                ratio: sup,
                aux: Some(inf),
                flag: None,
            }))
        });
        let mut report = InequalityReport::from_outcomes(
            InequalityId::VwhRiesz,
            self.params,
            Some(*family),
            outcomes,
        );
        report
            .notes
            .push("no support restriction: contrast with the Bessel-mode lemma".into());
        Ok(report)
    }

    /// `int (M f)^q dCap <= A int |f|^q dCap`.
    pub fn verify_thm13(&self, family: &TestFamily) -> Result<InequalityReport> {
        let q = self.params.q.ok_or_else(|| {
            CoreError::InvalidProblem("thm13 needs the power q".into())
        })?;
        let cfg = self.params.choquet_config();
        let radii = RadiusSet::auto(self.grid)?;
        let outcomes = self.sweep(family, |i| {
            let f = self.sample_field(family, i)?;
            let rhs = choquet_of_power(
                &f.abs(),
                q,
                &self.table,
                self.params.s,
                &cfg,
                &self.cache,
            )?
            .value;
            if rhs <= 0.0 {
                return Ok(None);
            }
            let mf = local_maximal(&f, &radii);
            let lhs =
                choquet_of_power(&mf, q, &self.table, self.params.s, &cfg, &self.cache)?.value;
            Ok(Some(SampleRecord { id: i, lhs, rhs, ratio: lhs / rhs, aux: None, flag: None }))
        });
        let mut report = InequalityReport::from_outcomes(
            InequalityId::Thm13Maximal,
            self.params,
            Some(*family),
            outcomes,
        );
        let n = self.grid.dim() as f64;
        let threshold = (n - self.params.spec.alpha) / n;
        if q <= threshold {
            report.notes.push(format!(
                "exploratory: q = {q} at or below the threshold (n - alpha)/n = {threshold}"
            ));
        }
        Ok(report)
    }

    /// `sum_j Cap(E inter B_j) <= M Cap(E)` over the unit-ball cover.
    pub fn verify_quasiadd(&self, family: &TestFamily) -> Result<InequalityReport> {
        let cover = unit_ball_cover(self.grid)?;
        let outcomes = self.sweep(family, |i| {
            let set = self.sample_set(family, i)?;
            if set.is_empty() {
                return Ok(None);
            }
            let problem =
                CapacityProblem::new(self.params.spec, self.grid, set, self.params.s)?;
            let q = quasi_additivity_ratio(
                &problem,
                &self.table,
                &cover,
                &self.params.solve_options(),
            )?;
            Ok(Some(SampleRecord {
                id: i,
                lhs: q.cap_sum,
                rhs: q.cap_whole,
                ratio: q.ratio,
                aux: Some(q.per_ball.len() as f64),
                flag: None,
            }))
        });
        let mut report = InequalityReport::from_outcomes(
            InequalityId::QuasiAdd,
            self.params,
            Some(*family),
            outcomes,
        );
        report.multiplicity = Some(cover.multiplicity);
        Ok(report)
    }

    /// Observed comparability constants of the Bessel kernel estimates.
    pub fn verify_two_sided(&self) -> Result<InequalityReport> {
        let (c1, c2) = check_two_sided(&self.params.spec, self.grid)?;
        let per_sample = vec![
            SampleRecord {
                id: 0,
                lhs: c1,
                rhs: 1.0,
                ratio: c1,
                aux: None,
                flag: Some("power_profile".into()),
            },
            SampleRecord {
                id: 1,
                lhs: c2,
                rhs: 1.0,
                ratio: c2,
                aux: None,
                flag: Some("translation".into()),
            },
        ];
        Ok(InequalityReport {
            inequality_id: InequalityId::TwoSidedKernel,
            params: self.params,
            family: None,
            observed_constant: c1.max(c2),
            skipped: 0,
            total: 2,
            skip_reasons: Vec::new(),
            per_sample,
            band: Some((c1.min(c2), c1.max(c2))),
            multiplicity: None,
            refinement: None,
            notes: vec![
                "sample 0: max ratio against |x|^{alpha-n} for |x| <= min(15, 2L); \
                 sample 1: max ratio G(x) vs G(x+y), |x| >= 3, |y| <= 1"
                    .into(),
            ],
        })
    }

    /// Dispatch by inequality id with its default family.
    pub fn run(&self, id: InequalityId, samples: usize) -> Result<InequalityReport> {
        let family = default_family(id, samples, self.params.seed);
        match id {
            InequalityId::Mazya => self.verify_mazya(&family),
            InequalityId::Capstrong => self.verify_capstrong(&family),
            InequalityId::Gfl1c => self.verify_gfl1c(&family),
            InequalityId::Thm12Band => self.verify_thm12(&family, (samples / 3).max(3)),
            InequalityId::Lemma31Bessel => self.verify_lemma31(&family),
            InequalityId::VwhRiesz => self.verify_vwh_riesz(&family),
            InequalityId::Thm13Maximal => self.verify_thm13(&family),
            InequalityId::QuasiAdd => self.verify_quasiadd(&family),
            InequalityId::TwoSidedKernel => self.verify_two_sided(),
            InequalityId::MvnChain => self.verify_mvn_chain(&family),
        }
    }
}

/// The family each inequality sweeps by default.
pub fn default_family(id: InequalityId, samples: usize, seed: u64) -> TestFamily {
    let kind = match id {
        InequalityId::Lemma31Bessel => FamilyKind::AtomCloud,
        InequalityId::VwhRiesz => FamilyKind::WideBumpPair,
        InequalityId::QuasiAdd => FamilyKind::ScatteredSets,
        _ => FamilyKind::BumpSum,
    };
    TestFamily { kind, count: samples, seed }
}

/// Run an inequality at `params.n`, optionally rerun at `2 n`, and attach
/// the refinement drift of the observed constant.
pub fn run_inequality(
    id: InequalityId,
    params: &HarnessParams,
    samples: usize,
    refine: bool,
) -> Result<InequalityReport> {
    let harness = Harness::new(*params)?;
    let mut report = harness.run(id, samples)?;
    if refine {
        let mut fine_params = *params;
        fine_params.n = params.n * 2;
        let fine = Harness::new(fine_params)?.run(id, samples)?;
        let drift = if report.observed_constant > 0.0 {
            (fine.observed_constant / report.observed_constant - 1.0).abs()
        } else {
            f64::INFINITY
        };
        report.refinement = Some(Refinement {
            coarse_n: params.n,
            fine_n: fine_params.n,
            coarse_constant: report.observed_constant,
            fine_constant: fine.observed_constant,
            drift,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bessel_params(n: usize) -> HarnessParams {
        let spec = KernelSpec::bessel(0.5, 1).unwrap();
        let mut p = HarnessParams::new(spec, 2.0);
        p.n = n;
        p
    }

    #[test]
    fn families_are_deterministic_given_the_seed() {
        let h = Harness::new(bessel_params(64)).unwrap();
        let fam = TestFamily { kind: FamilyKind::BumpSum, count: 3, seed: 7 };
        let a = h.sample_field(&fam, 1).unwrap();
        let b = h.sample_field(&fam, 1).unwrap();
        assert_eq!(a.values(), b.values());
        let other = TestFamily { seed: 8, ..fam };
        let c = h.sample_field(&other, 1).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn atom_clouds_respect_the_support_constraint() {
        let h = Harness::new(bessel_params(64)).unwrap();
        let fam = TestFamily { kind: FamilyKind::AtomCloud, count: 20, seed: 3 };
        for i in 0..fam.count {
            let mu = h.sample_measure(&fam, i).unwrap();
            assert!(mu.support_diameter() < 1.0);
            for atom in mu.atoms() {
                let r2: f64 = atom.location.iter().map(|x| x * x).sum();
                assert!(r2.sqrt() <= 0.5 + 1e-12, "atom outside B_1/2");
                assert!(atom.mass >= 0.0);
            }
        }
    }

    #[test]
    fn mazya_small_run_is_finite_and_scale_invariant() {
        let h = Harness::new(bessel_params(128)).unwrap();
        let fam = TestFamily { kind: FamilyKind::BumpSum, count: 3, seed: 42 };
        let report = h.verify_mazya(&fam).unwrap();
        assert!(report.skip_budget_ok());
        assert!(report.observed_constant.is_finite() && report.observed_constant > 0.0);
        for r in &report.per_sample {
            assert!(r.ratio.is_finite());
        }
    }

    #[test]
    fn mazya_ratio_is_invariant_under_doubling() {
        // both sides are degree-s homogeneous in f
        let h = Harness::new(bessel_params(128)).unwrap();
        let fam = TestFamily { kind: FamilyKind::BumpSum, count: 1, seed: 42 };
        let cfg = h.params.choquet_config();
        let f = h.sample_field(&fam, 0).unwrap();
        let mut ratios = Vec::new();
        for field in [f.clone(), f.scale(2.0)] {
            let rhs = field.map(|v| v.powf(2.0)).unwrap().integrate();
            let potential = h.table.convolve(&field).unwrap();
            let lhs = choquet_of_power(&potential, 2.0, &h.table, 2.0, &cfg, &h.cache)
                .unwrap()
                .value;
            ratios.push(lhs / rhs);
        }
        assert!(
            (ratios[1] / ratios[0] - 1.0).abs() < 1e-3,
            "ratios {} vs {}",
            ratios[0],
            ratios[1]
        );
    }

    #[test]
    fn capstrong_ratio_is_invariant_under_doubling() {
        let h = Harness::new(bessel_params(256)).unwrap();
        let fam = TestFamily { kind: FamilyKind::BumpSum, count: 1, seed: 42 };
        let (one, two) = h.capstrong_scaling_pair(&fam, 0).unwrap();
        assert!(
            (two / one - 1.0).abs() <= 1e-6,
            "ratios {one} vs {two}, drift {}",
            (two / one - 1.0).abs()
        );
    }

    #[test]
    fn gfl1c_dominates_capstrong_per_sample() {
        let h = Harness::new(bessel_params(128)).unwrap();
        let fam = TestFamily { kind: FamilyKind::BumpSum, count: 3, seed: 11 };
        let g = h.verify_gfl1c(&fam).unwrap();
        let c = h.verify_capstrong(&fam).unwrap();
        for (gr, cr) in g.per_sample.iter().zip(&c.per_sample) {
            assert!(gr.ratio >= cr.ratio * (1.0 - 1e-9), "kv bound must not exceed the rhs");
        }
    }

    #[test]
    fn lemma31_runs_and_scaling_is_invariant() {
        let h = Harness::new(bessel_params(128)).unwrap();
        let fam = TestFamily { kind: FamilyKind::AtomCloud, count: 3, seed: 5 };
        let report = h.verify_lemma31(&fam).unwrap();
        assert!(report.observed_constant.is_finite());
        let (a, b) = h.lemma31_mass_scaling(&fam, 0).unwrap();
        assert!((a / b - 1.0).abs() < 1e-8, "sup ratios {a} vs {b}");
    }

    #[test]
    fn vwh_riesz_runs_on_wide_pairs() {
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let mut p = HarnessParams::new(spec, 2.0);
        p.n = 128;
        let h = Harness::new(p).unwrap();
        let fam = TestFamily { kind: FamilyKind::WideBumpPair, count: 2, seed: 9 };
        let report = h.verify_vwh_riesz(&fam).unwrap();
        assert!(report.observed_constant.is_finite());
        assert!(report.skip_budget_ok());
    }

    #[test]
    fn vwh_sup_is_dilation_covariant() {
        // the same bump profile on the dilated configuration gives the same
        // pointwise sup ratio (Riesz homogeneity end to end)
        let spec = KernelSpec::riesz(0.5, 1).unwrap();
        let mut sups = Vec::new();
        for (n, l, scale) in [(128usize, 4.0f64, 1.0f64), (128, 8.0, 2.0)] {
            let mut p = HarnessParams::new(spec, 2.0);
            p.n = n;
            p.l = l;
            let h = Harness::new(p).unwrap();
            let f = Field::from_fn(h.grid, |x| {
                let d = (x[0] - 0.4 * scale) / (0.3 * scale);
                (-d * d).exp() + 0.5 * (-(x[0] + 1.1 * scale) * (x[0] + 1.1 * scale)
                    / (0.18 * scale * scale))
                    .exp()
            })
            .unwrap();
            let (sup, _) = h.pointwise_bound_extremes(&f).unwrap();
            sups.push(sup);
        }
        assert!(
            (sups[1] / sups[0] - 1.0).abs() <= 0.10,
            "sups {} vs {}",
            sups[0],
            sups[1]
        );
    }

    #[test]
    fn reports_serialize_deterministically() {
        let h = Harness::new(bessel_params(64)).unwrap();
        let report = h.verify_two_sided().unwrap();
        let a = serde_json::to_string(&report).unwrap();
        let b = serde_json::to_string(&h.verify_two_sided().unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn id_parsing_round_trips() {
        for id in InequalityId::all() {
            assert_eq!(InequalityId::parse(id.as_str()), Some(*id));
        }
        assert_eq!(InequalityId::parse("nope"), None);
    }
}
