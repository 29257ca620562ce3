//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Every tolerance is pinned in code. The criteria exercise golden kernel
//! values, the spectral-vs-direct convolution oracle, capacity duality and
//! the extremal-measure identities, the Riesz scaling law, Choquet/capacity
//! consistency, the equivalence bands of the capacitary functionals, the
//! pointwise potential bounds, the maximal-function inequality, and
//! quasi-additivity, plus byte-level determinism of verify reports.

use captool_core::capacity::{capacitary_measure, capacity, CapCache, CapacityProblem};
use captool_core::choquet::{choquet_integral, ChoquetConfig};
use captool_core::functionals::gamma_functional;
use captool_core::grid::{Field, Grid, GridSet};
use captool_core::kernel::{bessel_value, riesz_value, KernelSpec, KernelTable};
use captool_core::maximal::{local_maximal, RadiusSet};
use captool_core::solver::SolveOptions;
use captool_core::verify::{
    run_inequality, FamilyKind, Harness, HarnessParams, InequalityId, TestFamily,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

fn pass(number: u32, name: &str, started: Instant) {
    println!(
        "acceptance {number:02} {name}: PASS ({:.1}s)",
        started.elapsed().as_secs_f64()
    );
}

fn calibration_params(n: usize) -> HarnessParams {
    let spec = KernelSpec::bessel(0.5, 1).expect("valid spec");
    let mut p = HarnessParams::new(spec, 2.0);
    p.n = n;
    p
}

#[test]
fn criterion_01_kernel_golden_values() {
    let t0 = Instant::now();
    // dimension one, alpha = 2: G_2(x) = e^{-|x|} / 2
    let bessel = KernelSpec::bessel(2.0, 1).unwrap();
    for &x in &[0.5f64, 1.0, 2.0] {
        let v = bessel_value(&bessel, [x, 0.0, 0.0]).unwrap();
        let expected = (-x).exp() / 2.0;
        let rel = ((v - expected) / expected).abs();
        assert!(rel < 1e-7, "G_2({x}) = {v}, expected {expected} (rel {rel:.2e})");
    }
    // dimension three, alpha = 2 Riesz: 1 / (4 pi |x|)
    let riesz = KernelSpec::riesz(2.0, 3).unwrap();
    for &x in &[0.5f64, 1.0, 2.0] {
        let v = riesz_value(&riesz, [0.0, x, 0.0]).unwrap();
        let expected = 1.0 / (4.0 * PI * x);
        assert!(
            ((v - expected) / expected).abs() < 1e-12,
            "I_2({x}) = {v}, expected {expected}"
        );
    }
    pass(1, "kernel golden values", t0);
}

#[test]
fn criterion_02_convolution_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0117);
    let mut checked = 0usize;
    while checked < 100 {
        let dim = rng.gen_range(1..=3usize);
        let n = match dim {
            3 => [8usize, 16][rng.gen_range(0..2)],
            _ => [8usize, 16, 32][rng.gen_range(0..3)],
        };
        let grid = Grid::new(dim, n, rng.gen_range(0.5..2.0)).unwrap();
        let spec = if rng.gen::<bool>() {
            KernelSpec::bessel(rng.gen_range(0.3..2.0), dim).unwrap()
        } else {
            KernelSpec::riesz(rng.gen_range(0.2..(dim as f64 - 0.05)), dim).unwrap()
        };
        let table = KernelTable::build(spec, grid).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = Field::new(grid, values).unwrap();
        let fast = table.convolve(&f).unwrap();

        // direct O(N^2) summation
        let vol = grid.cell_volume();
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        let direct: Vec<f64> = (0..grid.len())
            .map(|x| {
                let xi = grid.multi_index(x);
                let mut acc = 0.0;
                for y in 0..grid.len() {
                    let yi = grid.multi_index(y);
                    let off = [
                        xi[0] as isize - yi[0] as isize,
                        xi[1] as isize - yi[1] as isize,
                        xi[2] as isize - yi[2] as isize,
                    ];
                    acc += table.sample_at_offset(off) * f.values()[y];
                }
                acc * vol
            })
            .collect();
        for (a, b) in fast.values().iter().zip(&direct) {
            scale = scale.max(b.abs());
            worst = worst.max((a - b).abs());
        }
        assert!(
            worst <= 1e-9 * scale.max(f64::MIN_POSITIVE),
            "dim {dim} n {n}: worst abs {worst:.2e} vs scale {scale:.2e}"
        );
        checked += 1;
    }
    pass(2, "spectral convolution matches direct summation", t0);
}

#[test]
fn criterion_03_capacity_duality_and_identities() {
    let t0 = Instant::now();
    struct Case {
        dim: usize,
        alpha: f64,
        n: usize,
        tol: f64,
        set: fn(Grid) -> GridSet,
    }
    let cases: Vec<Case> = vec![
        // dimension one, alpha = 0.5 (alpha * s = 1 = dim)
        Case { dim: 1, alpha: 0.5, n: 256, tol: 1e-3, set: |g| GridSet::ball(g, [0.0; 3], 0.5) },
        Case {
            dim: 1,
            alpha: 0.5,
            n: 256,
            tol: 1e-3,
            set: |g| GridSet::boxset(g, [0.0; 3], [1.0, 0.0, 0.0]),
        },
        Case {
            dim: 1,
            alpha: 0.5,
            n: 256,
            tol: 1e-3,
            set: |g| GridSet::ball(g, [0.8, 0.0, 0.0], 0.3),
        },
        Case {
            dim: 1,
            alpha: 0.5,
            n: 256,
            tol: 1e-3,
            set: |g| GridSet::boxset(g, [-1.2, 0.0, 0.0], [-0.4, 0.0, 0.0]),
        },
        // dimension two, alpha in {0.5, 1}
        Case {
            dim: 2,
            alpha: 0.5,
            n: 128,
            tol: 5e-4,
            set: |g| GridSet::ball(g, [0.3, 0.2, 0.0], 0.5),
        },
        Case {
            dim: 2,
            alpha: 0.5,
            n: 128,
            tol: 5e-4,
            set: |g| GridSet::boxset(g, [-0.5, -0.5, 0.0], [0.5, 0.5, 0.0]),
        },
        Case {
            dim: 2,
            alpha: 1.0,
            n: 128,
            tol: 5e-4,
            set: |g| GridSet::ball(g, [0.3, 0.2, 0.0], 0.5),
        },
        Case {
            dim: 2,
            alpha: 1.0,
            n: 128,
            tol: 5e-4,
            set: |g| GridSet::boxset(g, [-0.5, -0.5, 0.0], [0.5, 0.5, 0.0]),
        },
        Case {
            dim: 2,
            alpha: 1.0,
            n: 128,
            tol: 5e-4,
            set: |g| GridSet::ball(g, [-0.6, 0.5, 0.0], 0.35),
        },
        Case {
            dim: 2,
            alpha: 1.0,
            n: 128,
            tol: 5e-4,
            set: |g| GridSet::boxset(g, [0.0, -0.6, 0.0], [0.8, 0.2, 0.0]),
        },
    ];
    assert_eq!(cases.len(), 10);
    for (i, case) in cases.iter().enumerate() {
        let grid = Grid::new(case.dim, case.n, 4.0).unwrap();
        let spec = KernelSpec::bessel(case.alpha, case.dim).unwrap();
        let table = KernelTable::build(spec, grid).unwrap();
        let problem = CapacityProblem::new(spec, grid, (case.set)(grid), 2.0).unwrap();
        let opts = SolveOptions { tol: case.tol, max_iters: 200_000 };
        let m = capacitary_measure(&problem, &table, &opts).unwrap();
        assert!(m.gap <= 1e-3, "case {i}: gap {}", m.gap);
        for (j, ratio) in m.identities.iter().enumerate() {
            assert!(
                (ratio - 1.0).abs() <= 5e-3,
                "case {i} identity {j}: ratio {ratio}"
            );
        }
        assert!(
            m.min_potential_on_set >= 0.995,
            "case {i}: min potential {}",
            m.min_potential_on_set
        );
    }
    pass(3, "capacity duality and extremal-measure identities", t0);
}

#[test]
fn criterion_04_riesz_scaling_law() {
    let t0 = Instant::now();
    // cap(2E) lives on the dilated configuration: domain, grid, and set all
    // scale together, which is the discrete realization of the dilation
    // covariance the law states. A same-spacing dim-1 pair is added at the
    // end as a resolution-robustness check.
    struct Pair {
        dim: usize,
        n: usize,
        alpha: f64,
        s: f64,
    }
    let pairs = [
        Pair { dim: 1, n: 256, alpha: 0.5, s: 1.5 },
        Pair { dim: 1, n: 256, alpha: 0.25, s: 2.0 },
        Pair { dim: 2, n: 64, alpha: 0.5, s: 2.0 },
        Pair { dim: 2, n: 64, alpha: 1.0, s: 1.5 },
    ];
    let opts = SolveOptions { tol: 1e-3, max_iters: 200_000 };
    let scaling_exponent = |spec: KernelSpec, g1: Grid, g2: Grid, s: f64, shape: &str| -> f64 {
        let t1 = KernelTable::build(spec, g1).unwrap();
        let t2 = KernelTable::build(spec, g2).unwrap();
        let (e1, e2) = match shape {
            "ball" => (
                GridSet::ball(g1, [0.2, 0.1, 0.0], 0.35),
                GridSet::ball(g2, [0.4, 0.2, 0.0], 0.7),
            ),
            _ => (
                GridSet::boxset(g1, [-0.4, -0.3, 0.0], [0.4, 0.5, 0.0]),
                GridSet::boxset(g2, [-0.8, -0.6, 0.0], [0.8, 1.0, 0.0]),
            ),
        };
        let c1 = capacity(&CapacityProblem::new(spec, g1, e1, s).unwrap(), &t1, &opts)
            .unwrap()
            .value;
        let c2 = capacity(&CapacityProblem::new(spec, g2, e2, s).unwrap(), &t2, &opts)
            .unwrap()
            .value;
        (c2 / c1).log2()
    };
    for pair in &pairs {
        let g1 = Grid::new(pair.dim, pair.n, 4.0).unwrap();
        let g2 = Grid::new(pair.dim, pair.n, 8.0).unwrap();
        let spec = KernelSpec::riesz(pair.alpha, pair.dim).unwrap();
        let target = pair.dim as f64 - pair.alpha * pair.s;
        for shape in ["ball", "box"] {
            let exponent = scaling_exponent(spec, g1, g2, pair.s, shape);
            assert!(
                (exponent - target).abs() <= 0.05,
                "dim {} alpha {} s {} {shape}: exponent {exponent:.4} target {target:.4}",
                pair.dim,
                pair.alpha,
                pair.s
            );
        }
    }
    // same-spacing pair: the dilate is re-resolved at the original h
    let spec = KernelSpec::riesz(0.5, 1).unwrap();
    let g1 = Grid::new(1, 256, 4.0).unwrap();
    let g2 = Grid::new(1, 512, 8.0).unwrap();
    for shape in ["ball", "box"] {
        let exponent = scaling_exponent(spec, g1, g2, 1.5, shape);
        assert!(
            (exponent - 0.25).abs() <= 0.05,
            "same-spacing {shape}: exponent {exponent:.4}"
        );
    }
    pass(4, "riesz scaling law", t0);
}

#[test]
fn criterion_05_choquet_capacity_consistency() {
    let t0 = Instant::now();
    let grid = Grid::new(1, 256, 4.0).unwrap();
    let spec = KernelSpec::bessel(0.5, 1).unwrap();
    let table = KernelTable::build(spec, grid).unwrap();
    let set = GridSet::ball(grid, [0.2, 0.0, 0.0], 0.5);
    let opts = SolveOptions::with_tol(1e-3);
    let cap = capacity(
        &CapacityProblem::new(spec, grid, set.clone(), 2.0).unwrap(),
        &table,
        &opts,
    )
    .unwrap()
    .value;

    let cache = CapCache::new();
    let cfg = ChoquetConfig {
        k_min: -10,
        k_max: 2,
        levels_per_octave: 4, // quarter-octave levels
        tol: 1e-3,
        max_iters: 200_000,
    };
    let r = choquet_integral(&Field::indicator(&set), &table, 2.0, &cfg, &cache).unwrap();
    let (lo, hi) = r.truncation_bounds;
    assert!(
        lo <= cap * (1.0 + 3e-3) && cap * (1.0 - 3e-3) <= hi,
        "bracket [{lo}, {hi}] misses Cap = {cap}"
    );
    assert!(
        (r.value / cap - 1.0).abs() <= 0.05,
        "lower sum {} vs Cap {cap} ({:+.2}%)",
        r.value,
        (r.value / cap - 1.0) * 100.0
    );
    pass(5, "choquet/capacity consistency at quarter-octave levels", t0);
}

#[test]
fn criterion_06_funequn_band() {
    let t0 = Instant::now();
    let mut bands = Vec::new();
    for n in [256usize, 512] {
        let params = calibration_params(n);
        let harness = Harness::new(params).unwrap();
        let family = TestFamily { kind: FamilyKind::BumpSum, count: 30, seed: 0xF0E };
        let cfg = params.choquet_config();
        let opts = params.solve_options();
        let mut band: f64 = 0.0;
        for i in 0..family.count {
            let u = harness.sample_field(&family, i).unwrap();
            let c = choquet_integral(&u, &harness.table, 2.0, &cfg, &harness.cache)
                .unwrap()
                .value;
            let g = gamma_functional(&u, &harness.table, 2.0, &opts).unwrap().value;
            assert!(c > 0.0 && g > 0.0, "sample {i}: degenerate C {c} gamma {g}");
            let ratio = c / g;
            band = band.max(ratio.max(1.0 / ratio));
        }
        assert!(band.is_finite(), "band must be finite");
        bands.push(band);
    }
    let drift = (bands[1] / bands[0] - 1.0).abs();
    assert!(
        drift <= 0.25,
        "band drift {drift:.3} between N = 256 ({:.4}) and N = 512 ({:.4})",
        bands[0],
        bands[1]
    );
    pass(6, "choquet/gamma equivalence band", t0);
}

#[test]
fn criterion_07_capstrong_harness() {
    let t0 = Instant::now();
    let params = calibration_params(256);
    let report = run_inequality(InequalityId::Capstrong, &params, 50, true).unwrap();
    assert!(report.skip_budget_ok(), "skips {}/{}", report.skipped, report.total);
    assert!(
        report.observed_constant.is_finite() && report.observed_constant > 0.0,
        "observed {}",
        report.observed_constant
    );
    let refinement = report.refinement.expect("refinement attached");
    assert!(
        refinement.drift <= 0.25,
        "refinement drift {:.3} ({} -> {})",
        refinement.drift,
        refinement.coarse_constant,
        refinement.fine_constant
    );

    // degree-one homogeneity: the ratio is invariant under f -> 2f
    let harness = Harness::new(params).unwrap();
    let family = TestFamily { kind: FamilyKind::BumpSum, count: 3, seed: params.seed };
    for i in 0..3 {
        let (one, two) = harness.capstrong_scaling_pair(&family, i).unwrap();
        assert!(
            (two / one - 1.0).abs() <= 1e-6,
            "sample {i}: ratio drift {:.2e} under doubling",
            (two / one - 1.0).abs()
        );
    }
    pass(7, "capacitary strong type inequality harness", t0);
}

#[test]
fn criterion_08_thm12_witness_band() {
    let t0 = Instant::now();
    let mut bump_max = Vec::new();
    let mut indicator_max = Vec::new();
    for n in [256usize, 512] {
        let params = calibration_params(n);
        let harness = Harness::new(params).unwrap();
        let family = TestFamily { kind: FamilyKind::BumpSum, count: 9, seed: 0x7212 };
        let report = harness.verify_thm12(&family, 4).unwrap();
        assert!(report.skip_budget_ok(), "skips {}/{}", report.skipped, report.total);
        assert!(
            !report.has_witness_quality_failure(),
            "witness rescale constant exceeded 100"
        );
        let (bumps, indicators): (Vec<_>, Vec<_>) = report
            .per_sample
            .iter()
            .partition(|r| r.flag.as_deref() != Some("indicator"));
        assert!(!bumps.is_empty() && !indicators.is_empty());
        for r in report.per_sample.iter() {
            assert!(r.ratio.is_finite() && r.ratio > 0.0, "ratio {}", r.ratio);
            if let Some(c) = r.aux {
                assert!(c <= 100.0, "rescale constant {c}");
            }
            let chain_ok = r.flag.as_deref().map_or(true, |f| !f.starts_with("chain_violation"));
            assert!(chain_ok, "sample {}: {:?}", r.id, r.flag);
        }
        bump_max.push(bumps.iter().map(|r| r.ratio).fold(0.0f64, f64::max));
        indicator_max.push(indicators.iter().map(|r| r.ratio).fold(0.0f64, f64::max));
    }
    let bump_drift = (bump_max[1] / bump_max[0] - 1.0).abs();
    let ind_drift = (indicator_max[1] / indicator_max[0] - 1.0).abs();
    assert!(bump_drift <= 0.25, "band drift {bump_drift:.3}");
    assert!(ind_drift <= 0.25, "indicator drift {ind_drift:.3}");
    pass(8, "choquet/lambda/beta equivalence witness band", t0);
}

#[test]
fn criterion_09_pointwise_bounds() {
    let t0 = Instant::now();
    // Bessel lemma on compactly supported measures
    let params = calibration_params(256);
    let harness = Harness::new(params).unwrap();
    let family = TestFamily { kind: FamilyKind::AtomCloud, count: 20, seed: 0x131 };
    let report = harness.verify_lemma31(&family).unwrap();
    assert_eq!(report.skipped, 0, "skips: {:?}", report.skip_reasons);
    assert!(report.observed_constant.is_finite() && report.observed_constant > 0.0);
    for r in &report.per_sample {
        assert!(r.ratio.is_finite());
    }
    // mass-scaling invariance of the sup ratio
    for i in 0..3 {
        let (a, b) = harness.lemma31_mass_scaling(&family, i).unwrap();
        assert!((a / b - 1.0).abs() <= 1e-8, "sample {i}: sups {a} vs {b}");
    }

    // Riesz bound with unrestricted support
    let riesz = KernelSpec::riesz(0.5, 1).unwrap();
    let mut rparams = HarnessParams::new(riesz, 2.0);
    rparams.n = 256;
    let rharness = Harness::new(rparams).unwrap();
    let rfamily = TestFamily { kind: FamilyKind::WideBumpPair, count: 10, seed: 0x132 };
    let rreport = rharness.verify_vwh_riesz(&rfamily).unwrap();
    assert!(rreport.skip_budget_ok());
    assert!(
        rreport.observed_constant.is_finite() && rreport.observed_constant > 0.0,
        "vwh observed {}",
        rreport.observed_constant
    );
    pass(9, "pointwise potential bounds (bessel lemma, riesz form)", t0);
}

#[test]
fn criterion_10_maximal_inequality() {
    let t0 = Instant::now();
    // harness sweeps at q = 0.75 and q = 1 (threshold (n - alpha)/n = 0.5)
    for q in [0.75f64, 1.0] {
        let mut params = calibration_params(256);
        params.q = Some(q);
        let report = run_inequality(InequalityId::Thm13Maximal, &params, 12, true).unwrap();
        assert!(report.skip_budget_ok(), "q {q}: skips {}", report.skipped);
        assert!(
            report.observed_constant.is_finite() && report.observed_constant >= 1.0 - 1e-9,
            "q {q}: observed {}",
            report.observed_constant
        );
        let refinement = report.refinement.expect("refinement attached");
        assert!(
            refinement.drift <= 0.25,
            "q {q}: drift {:.3} ({} -> {})",
            refinement.drift,
            refinement.coarse_constant,
            refinement.fine_constant
        );
    }

    // exactness properties of the discrete operator
    let grid = Grid::new(1, 256, 4.0).unwrap();
    let radii = RadiusSet::auto(grid).unwrap();
    let ones = Field::constant(grid, 1.0);
    let m1 = local_maximal(&ones, &radii);
    for (a, b) in m1.values().iter().zip(ones.values()) {
        assert_eq!(a, b, "constant field must be fixed exactly");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xA10);
    for pair in 0..50 {
        let f = Field::new(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let g = Field::new(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let mf = local_maximal(&f, &radii);
        let mg = local_maximal(&g, &radii);
        let msum = local_maximal(&f.add(&g).unwrap(), &radii);
        for i in 0..grid.len() {
            // sublinearity, exact up to the single rounding each
            // independently computed average carries
            assert!(
                msum.values()[i] <= (mf.values()[i] + mg.values()[i]) * (1.0 + 4.0 * f64::EPSILON),
                "pair {pair} cell {i}"
            );
        }
        // dyadic homogeneity is bitwise exact
        let c = (rng.gen_range(-3..=3) as f64).exp2();
        let mcf = local_maximal(&f.scale(c), &radii);
        for i in 0..grid.len() {
            assert_eq!(mcf.values()[i], c * mf.values()[i], "pair {pair} cell {i}");
        }
    }
    pass(10, "maximal function inequality and exactness", t0);
}

#[test]
fn criterion_11_quasi_additivity() {
    let t0 = Instant::now();
    // pinned safety factor on the upper bound: the pieces of a component
    // can meet up to twice as many balls as the per-point multiplicity
    const SAFETY: f64 = 2.0;
    let params = calibration_params(256);
    let harness = Harness::new(params).unwrap();
    let family = TestFamily { kind: FamilyKind::ScatteredSets, count: 10, seed: 0x9A };
    let report = harness.verify_quasiadd(&family).unwrap();
    assert_eq!(report.skipped, 0, "skips: {:?}", report.skip_reasons);
    let multiplicity = report.multiplicity.expect("cover multiplicity") as f64;
    for r in &report.per_sample {
        assert!(r.ratio.is_finite());
        assert!(r.ratio >= 1.0 - 0.05, "sample {}: ratio {}", r.id, r.ratio);
        assert!(
            r.ratio <= multiplicity * 1.05 * SAFETY,
            "sample {}: ratio {} vs bound {}",
            r.id,
            r.ratio,
            multiplicity * 1.05 * SAFETY
        );
    }
    pass(11, "quasi-additivity over the unit-ball cover", t0);
}

#[test]
fn criterion_12_verify_reports_are_deterministic() {
    let t0 = Instant::now();
    let bin = env!("CARGO_BIN_EXE_captool");
    let dir = tempfile::tempdir().unwrap();
    let mut payloads = Vec::new();
    // identical invocation twice: same seed, same out path (the payload
    // embeds the resolved config, so the arguments must really repeat)
    let out = dir.path().join("report.json");
    for _run in 0..2 {
        let status = std::process::Command::new(bin)
            .args([
                "verify",
                "--which",
                "mazya",
                "--alpha",
                "0.5",
                "--dim",
                "1",
                "--s",
                "2",
                "--n",
                "128",
                "--samples",
                "5",
                "--seed",
                "123",
                "--levels",
                "-20:8",
                "--out",
            ])
            .arg(&out)
            .status()
            .expect("captool runs");
        assert!(status.success(), "verify run failed");
        let text = std::fs::read_to_string(&out).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        payloads.push(serde_json::to_string(&value["payload"]).unwrap());
    }
    assert_eq!(payloads[0], payloads[1], "payloads differ between identical runs");
    assert!(payloads[0].len() > 100);
    pass(12, "verify reports byte-identical given the seed", t0);
}
