//! Subcommand implementations. Every command validates its configuration
//! up front, runs the requested computation, and emits a report envelope.
//! Exit codes: 0 success, 2 config error, 3 solver non-convergence,
//! 4 witness-quality failure, 5 skip budget exceeded.

use crate::config::ExperimentConfig;
use crate::io;
use crate::report;
use anyhow::{anyhow, bail, Context, Result};
use captool_core::capacity::{capacitary_measure, CapCache, CapacityProblem};
use captool_core::choquet::{choquet_integral, ChoquetConfig};
use captool_core::functionals::{
    beta_value, beta_witness_from_choquet, default_sup_family, gamma_functional, kv_upper,
    lambda_upper, measure_norm, multiplier_norm, BetaWitnessOptions, Witness,
};
use captool_core::kernel::check_two_sided;
use captool_core::maximal::{local_maximal, potential_maximal_domination, RadiusSet};
use captool_core::solver::SolveOptions;
use captool_core::verify::{run_inequality, HarnessParams, InequalityId};
use captool_core::{CoreError, Field, Grid, KernelKind, KernelSpec, KernelTable};
use serde_json::json;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_WITNESS_QUALITY: i32 = 4;
pub const EXIT_SKIP_BUDGET: i32 = 5;

/// Run a validated configuration; returns the process exit code.
pub fn execute(config: &ExperimentConfig) -> Result<i32> {
    if let Err(errors) = config.validate() {
        for e in &errors {
            eprintln!("config error: {e}");
        }
        return Ok(EXIT_CONFIG);
    }
    if let Some(jobs) = config.jobs {
        // best effort: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let outcome = match config.mode.as_str() {
        "capacity" => run_capacity(config),
        "choquet" => run_choquet(config),
        "functional" => run_functional(config),
        "maximal" => run_maximal(config),
        "verify" => run_verify(config),
        "kernel-check" => run_kernel_check(config),
        other => bail!("unknown mode {other:?}"),
    };
    match outcome {
        Ok(code) => Ok(code),
        Err(err) => match err.downcast_ref::<CoreError>() {
            Some(CoreError::NonConvergence { .. }) => {
                eprintln!("solver did not converge: {err}");
                Ok(EXIT_NONCONVERGENCE)
            }
            Some(CoreError::WitnessQuality { .. }) => {
                eprintln!("witness-quality failure: {err}");
                Ok(EXIT_WITNESS_QUALITY)
            }
            Some(CoreError::SkipBudget { .. }) => {
                eprintln!("skip budget exceeded: {err}");
                Ok(EXIT_SKIP_BUDGET)
            }
            _ => Err(err),
        },
    }
}

fn kernel_spec(config: &ExperimentConfig) -> Result<KernelSpec> {
    config
        .kernel_spec()
        .ok_or_else(|| anyhow!("invalid kernel spec in configuration"))
}

fn grid(config: &ExperimentConfig) -> Result<Grid> {
    Grid::new(config.kernel.dim, config.grid.n, config.grid.l).map_err(|e| anyhow!("{e}"))
}

fn solve_options(config: &ExperimentConfig) -> SolveOptions {
    SolveOptions { tol: config.solver.tol, max_iters: config.solver.max_iters }
}

fn choquet_config(config: &ExperimentConfig) -> ChoquetConfig {
    ChoquetConfig {
        k_min: config.levels.k_min,
        k_max: config.levels.k_max,
        levels_per_octave: config.levels.per_octave,
        tol: config.solver.tol,
        max_iters: config.solver.max_iters,
    }
}

fn cache() -> CapCache {
    match std::env::var_os("CAPTOOL_CACHE_DIR") {
        Some(dir) => CapCache::with_disk(PathBuf::from(dir)),
        None => CapCache::new(),
    }
}

/// Load a field and check it lives on the configured grid.
fn load_field(config: &ExperimentConfig, path: &PathBuf) -> Result<Field> {
    let field = io::read_field(path)?;
    let expected = grid(config)?;
    if field.grid() != expected {
        bail!(
            "field grid (dim {}, n {}, L {}) does not match the configured grid \
             (dim {}, n {}, L {})",
            field.grid().dim(),
            field.grid().points_per_axis(),
            field.grid().half_extent(),
            expected.dim(),
            expected.points_per_axis(),
            expected.half_extent()
        );
    }
    Ok(field)
}

fn run_capacity(config: &ExperimentConfig) -> Result<i32> {
    let spec = kernel_spec(config)?;
    let g = grid(config)?;
    let set = io::parse_set(g, config.set.as_deref().expect("validated"))?;
    let table = KernelTable::build(spec, g).map_err(|e| anyhow!("{e}"))?;
    let problem =
        CapacityProblem::new(spec, g, set, config.s).map_err(|e| anyhow!("{e}"))?;
    let m = capacitary_measure(&problem, &table, &solve_options(config))
        .map_err(|e| anyhow::Error::new(e))?;
    let result = json!({
        "value": m.value,
        "gap": m.gap,
        "iterations": m.iterations,
        "identities": {
            "mass_over_capacity": m.identities[0],
            "potential_pairing_over_capacity": m.identities[1],
            "energy_over_capacity": m.identities[2],
        },
        "min_potential_on_set": m.min_potential_on_set,
        "set_measure": io::parse_set(g, config.set.as_deref().expect("validated"))?.measure(),
    });
    report::emit(config, result)?;
    Ok(EXIT_OK)
}

fn run_choquet(config: &ExperimentConfig) -> Result<i32> {
    let spec = kernel_spec(config)?;
    let g = grid(config)?;
    let field = load_field(config, config.field.as_ref().expect("validated"))?;
    let table = KernelTable::build(spec, g).map_err(|e| anyhow!("{e}"))?;
    let cache = cache();
    let result = choquet_integral(&field, &table, config.s, &choquet_config(config), &cache)
        .map_err(anyhow::Error::new)?;
    let per_level: Vec<_> =
        result.per_level.iter().map(|l| json!({"t": l.t, "cap": l.cap})).collect();
    report::emit(
        config,
        json!({
            "value": result.value,
            "truncation_bounds": {
                "lower": result.truncation_bounds.0,
                "upper": result.truncation_bounds.1,
            },
            "per_level": per_level,
        }),
    )?;
    Ok(EXIT_OK)
}

fn run_functional(config: &ExperimentConfig) -> Result<i32> {
    let spec = kernel_spec(config)?;
    let g = grid(config)?;
    let table = KernelTable::build(spec, g).map_err(|e| anyhow!("{e}"))?;
    let opts = solve_options(config);
    let which = config.which.as_deref().expect("validated");

    let mut witness_field: Option<Field> = None;
    let value = match which {
        "gamma" => {
            let u = load_field(config, config.field.as_ref().expect("validated"))?;
            let v = gamma_functional(&u, &table, config.s, &opts)
                .map_err(anyhow::Error::new)?;
            if let Some(Witness::Density(w)) = &v.witness {
                witness_field = Some(w.clone());
            }
            json!({
                "kind": "gamma", "value": v.value, "certified": v.certified, "gap": v.gap,
            })
        }
        "beta" => {
            let u = load_field(config, config.field.as_ref().expect("validated"))?;
            match &config.density {
                Some(density_path) => {
                    let f = load_field(config, density_path)?;
                    let v = beta_value(&u, &f, &table, config.s)
                        .map_err(anyhow::Error::new)?;
                    json!({"kind": "beta", "value": v, "certified": false,
                           "density": density_path})
                }
                None => {
                    let wopts = BetaWitnessOptions {
                        k_min: config.levels.k_min.max(-12),
                        k_max: config.levels.k_max,
                        solve: opts,
                        polish_steps: config.polish.unwrap_or(0),
                    };
                    let v = beta_witness_from_choquet(&u, &table, config.s, &wopts)
                        .map_err(anyhow::Error::new)?;
                    if let Some(Witness::Density(w)) = &v.witness {
                        witness_field = Some(w.clone());
                    }
                    json!({
                        "kind": "beta", "value": v.value, "certified": v.certified,
                        "rescale_constant": v.rescale_constant,
                        "dropped_band_contribution": v.dropped_contribution,
                    })
                }
            }
        }
        "lambda" => {
            let u = load_field(config, config.field.as_ref().expect("validated"))?;
            let wopts = BetaWitnessOptions {
                k_min: config.levels.k_min.max(-12),
                k_max: config.levels.k_max,
                solve: opts,
                polish_steps: config.polish.unwrap_or(0),
            };
            let v = lambda_upper(&u, &table, config.s, &wopts).map_err(anyhow::Error::new)?;
            if let Some(Witness::Density(w)) = &v.witness {
                witness_field = Some(w.clone());
            }
            json!({
                "kind": "lambda_surrogate_via_beta_witness",
                "value": v.value, "certified": v.certified,
                "rescale_constant": v.rescale_constant,
                "dropped_band_contribution": v.dropped_contribution,
            })
        }
        "kv" => {
            let f = load_field(config, config.field.as_ref().expect("validated"))?;
            let v = kv_upper(&f, &table, config.s).map_err(anyhow::Error::new)?;
            if let Some(Witness::Density(w)) = &v.witness {
                witness_field = Some(w.clone());
            }
            json!({"kind": "kv_upper", "value": v.value, "certified": v.certified})
        }
        "mult" => {
            let f = load_field(config, config.field.as_ref().expect("validated"))?;
            let family = default_sup_family(g, Some(&f));
            let cache = cache();
            let p = config.p.expect("validated");
            let v = multiplier_norm(&f, p, &table, config.s, &family, &cache, &opts)
                .map_err(anyhow::Error::new)?;
            json!({
                "kind": "multiplier", "value": v.value, "certified": v.certified,
                "family_size": family.len(), "skipped_members": v.skipped_members,
            })
        }
        "measure" => {
            let mu = io::read_measure(
                config.measure.as_ref().expect("validated"),
                config.kernel.dim,
            )?;
            let family = default_sup_family(g, None);
            let cache = cache();
            let v = measure_norm(&mu, &table, config.s, &family, &cache, &opts)
                .map_err(anyhow::Error::new)?;
            json!({
                "kind": "measure_norm", "value": v.value, "certified": v.certified,
                "family_size": family.len(), "skipped_members": v.skipped_members,
            })
        }
        other => bail!("unknown functional {other:?}"),
    };

    let witness_path = match (&witness_field, &config.out_field) {
        (Some(w), Some(path)) => {
            io::write_field(path, w)?;
            Some(path.display().to_string())
        }
        _ => None,
    };
    let mut result = value;
    if let Some(p) = witness_path {
        result["witness_path"] = json!(p);
    }
    report::emit(config, result)?;
    Ok(EXIT_OK)
}

fn run_maximal(config: &ExperimentConfig) -> Result<i32> {
    let g = grid(config)?;
    let field = load_field(config, config.field.as_ref().expect("validated"))?;
    let radii = match config.radii.as_deref() {
        None | Some("auto") => RadiusSet::auto(g).map_err(anyhow::Error::new)?,
        Some(list) => {
            let extras: Vec<f64> = list
                .split(',')
                .map(|t| t.trim().parse().context("parsing radius"))
                .collect::<Result<_>>()?;
            RadiusSet::with_extra(g, &extras).map_err(anyhow::Error::new)?
        }
    };
    let m = local_maximal(&field, &radii);
    if let Some(path) = &config.out_field {
        io::write_field(path, &m)?;
    }
    let mut result = json!({
        "radii": radii.radii(),
        "max_value": m.max_value(),
        "boundary_policy": "clipped-ball averaging (interior cells only, clipped measure)",
    });
    if let Some(q) = config.dominate_q {
        let spec = kernel_spec(config)?;
        let table = KernelTable::build(spec, g).map_err(|e| anyhow!("{e}"))?;
        let ratio = potential_maximal_domination(&field, q, &table, &radii)
            .map_err(anyhow::Error::new)?;
        let threshold = (g.dim() as f64 - spec.alpha) / g.dim() as f64;
        result["domination"] = json!({
            "q": q,
            "sup_ratio": ratio,
            "threshold": threshold,
            "above_threshold": q > threshold,
        });
    }
    report::emit(config, result)?;
    Ok(EXIT_OK)
}

fn run_verify(config: &ExperimentConfig) -> Result<i32> {
    let spec = kernel_spec(config)?;
    let id = InequalityId::parse(config.which.as_deref().expect("validated"))
        .expect("validated");
    let params = HarnessParams {
        spec,
        s: config.s,
        q: config.q,
        n: config.grid.n,
        l: config.grid.l,
        tol: config.solver.tol,
        max_iters: config.solver.max_iters,
        seed: config.solver.seed,
        k_min: config.levels.k_min,
        k_max: config.levels.k_max,
        levels_per_octave: config.levels.per_octave,
    };
    let samples = config.samples.unwrap_or(20);
    let report_data =
        run_inequality(id, &params, samples, config.refine).map_err(anyhow::Error::new)?;

    if config.format.as_deref() == Some("csv") {
        let csv_path = match &config.out {
            Some(p) => p.with_extension("csv"),
            None => PathBuf::from(format!("{}.csv", id.as_str())),
        };
        report::write_csv(&csv_path, &report_data)?;
    }
    if let Some(hist) = &config.histogram {
        report::write_histogram(hist, &report_data, 20)?;
    }

    let skip_ok = report_data.skip_budget_ok();
    let witness_ok = !report_data.has_witness_quality_failure();
    report::emit(config, serde_json::to_value(&report_data)?)?;
    if !skip_ok {
        eprintln!(
            "skip budget exceeded: {}/{} samples skipped",
            report_data.skipped, report_data.total
        );
        return Ok(EXIT_SKIP_BUDGET);
    }
    if !witness_ok {
        eprintln!("witness-quality failure recorded in report");
        return Ok(EXIT_WITNESS_QUALITY);
    }
    Ok(EXIT_OK)
}

fn run_kernel_check(config: &ExperimentConfig) -> Result<i32> {
    let spec = kernel_spec(config)?;
    let g = grid(config)?;
    let table = KernelTable::build(spec, g).map_err(|e| anyhow!("{e}"))?;

    // radial samples along the first axis
    let probes: Vec<serde_json::Value> = [0.5f64, 1.0, 2.0]
        .iter()
        .map(|&r| {
            let v = captool_core::kernel::point_value(&spec, r).map(|v| json!(v));
            json!({"radius": r, "value": v.unwrap_or(json!(null))})
        })
        .collect();

    // monotone decay along the axis ray
    let n = g.points_per_axis();
    let mut monotone = true;
    let mut prev = table.sample_at_offset([0, 0, 0]);
    for o in 1..n as isize {
        let v = table.sample_at_offset([o, 0, 0]);
        if v > prev * (1.0 + 1e-12) {
            monotone = false;
            break;
        }
        prev = v;
    }

    let two_sided = if spec.kind == KernelKind::Bessel && g.half_extent() >= 4.0 {
        let (c1, c2) = check_two_sided(&spec, g).map_err(anyhow::Error::new)?;
        json!({"c1_power_profile": c1, "c2_translation": c2})
    } else {
        json!(null)
    };

    if let Some(path) = &config.out_field {
        io::write_table_binary(path, &table)?;
    }

    report::emit(
        config,
        json!({
            "origin_cell_average": table.origin_cell_average(),
            "operator_norm_bound": table.operator_norm_bound(),
            "point_values": probes,
            "monotone_along_axis": monotone,
            "two_sided": two_sided,
        }),
    )?;
    Ok(EXIT_OK)
}
