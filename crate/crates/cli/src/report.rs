//! Report envelope: a deterministic `payload` block (schema version, the
//! resolved config, and the results) plus a `meta` block quarantining
//! timestamps and host facts so payloads stay byte-diffable across reruns.

use crate::config::ExperimentConfig;
use anyhow::{Context, Result};
use captool_core::verify::InequalityReport;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Serialize)]
pub struct Envelope {
    pub payload: Value,
    pub meta: Value,
}

pub fn envelope(config: &ExperimentConfig, result: Value) -> Envelope {
    let payload = json!({
        "schema_version": config.schema_version,
        "config": config.normalize(),
        "result": result,
    });
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({
        "timestamp_unix": timestamp,
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
    });
    Envelope { payload, meta }
}

pub fn write_json(path: &Path, env: &Envelope) -> Result<()> {
    let text = serde_json::to_string_pretty(env)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Emit the envelope to the requested path or stdout.
pub fn emit(config: &ExperimentConfig, result: Value) -> Result<()> {
    let env = envelope(config, result);
    match &config.out {
        Some(path) => write_json(path, &env),
        None => {
            println!("{}", serde_json::to_string_pretty(&env)?);
            Ok(())
        }
    }
}

/// Per-sample CSV table for a verify report (written next to the JSON).
pub fn write_csv(path: &Path, report: &InequalityReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["sample", "lhs", "rhs", "ratio", "aux", "flag"])?;
    for r in &report.per_sample {
        w.write_record([
            r.id.to_string(),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.ratio),
            r.aux.map(|a| format!("{a:e}")).unwrap_or_default(),
            r.flag.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Ratio histogram in a gnuplot-friendly two-column format
/// (`bin_center count`).
pub fn write_histogram(path: &Path, report: &InequalityReport, bins: usize) -> Result<()> {
    let ratios: Vec<f64> = report.per_sample.iter().map(|r| r.ratio).collect();
    let mut text = String::from("# ratio count\n");
    if !ratios.is_empty() {
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
        let mut counts = vec![0usize; bins];
        for r in &ratios {
            let b = (((r - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let center = lo + (b as f64 + 0.5) * width;
            text.push_str(&format!("{center:e} {c}\n"));
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
