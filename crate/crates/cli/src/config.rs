//! Experiment configuration: one serializable struct covering every
//! subcommand, validated up front with every violation reported, not just
//! the first.

use captool_core::{KernelKind, KernelSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Subcommand id: capacity | choquet | functional | maximal | verify |
    /// kernel-check.
    pub mode: String,
    pub kernel: KernelCfg,
    pub grid: GridCfg,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default)]
    pub levels: LevelsCfg,
    /// Exponent s of the capacity (s > 1).
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<PathBuf>,
    /// Functional kind or inequality id, depending on the mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub which: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub refine: bool,
    /// Maximal radii: "auto" or comma-separated extras in (0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominate_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polish: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_field: Option<PathBuf>,
    /// json (default) or csv (adds a per-sample table next to the JSON).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<PathBuf>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_s() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelCfg {
    /// bessel | riesz
    pub kind: String,
    pub alpha: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridCfg {
    pub n: usize,
    #[serde(default = "default_l")]
    pub l: f64,
}

fn default_l() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SolverCfg {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SolverCfg {
    fn default() -> Self {
        SolverCfg { tol: 1e-3, max_iters: 80_000, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LevelsCfg {
    pub k_min: i32,
    pub k_max: i32,
    pub per_octave: u32,
}

impl Default for LevelsCfg {
    fn default() -> Self {
        LevelsCfg { k_min: -12, k_max: 6, per_octave: 1 }
    }
}

const MODES: &[&str] =
    &["capacity", "choquet", "functional", "maximal", "verify", "kernel-check"];

impl ExperimentConfig {
    pub fn kernel_kind(&self) -> Option<KernelKind> {
        match self.kernel.kind.as_str() {
            "bessel" => Some(KernelKind::Bessel),
            "riesz" => Some(KernelKind::Riesz),
            _ => None,
        }
    }

    pub fn kernel_spec(&self) -> Option<KernelSpec> {
        KernelSpec::new(self.kernel_kind()?, self.kernel.alpha, self.kernel.dim).ok()
    }

    /// Check every module precondition before any solve starts; returns the
    /// full list of violations.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errors.push(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !MODES.contains(&self.mode.as_str()) {
            errors.push(format!("mode {:?} is not one of {MODES:?}", self.mode));
        }
        if !(1..=3).contains(&self.kernel.dim) {
            errors.push(format!("kernel.dim must be 1..=3, got {}", self.kernel.dim));
        }
        if !(self.kernel.alpha.is_finite() && self.kernel.alpha > 0.0) {
            errors.push(format!("kernel.alpha must be positive, got {}", self.kernel.alpha));
        }
        // kernel-check and plain maximal runs never solve a capacity, so the
        // capacity hypothesis does not constrain them
        let solves_capacities =
            matches!(self.mode.as_str(), "capacity" | "choquet" | "functional" | "verify");
        match self.kernel.kind.as_str() {
            "bessel" => {
                // Bessel capacity hypothesis: alpha > 0 and s > 1 with
                // alpha * s <= dim
                if solves_capacities && self.kernel.alpha * self.s > self.kernel.dim as f64 {
                    errors.push(format!(
                        "Bessel mode requires alpha > 0 and s > 1 such that alpha * s <= dim: \
                         alpha * s = {} exceeds dim = {}",
                        self.kernel.alpha * self.s,
                        self.kernel.dim
                    ));
                }
            }
            "riesz" => {
                if self.kernel.alpha >= self.kernel.dim as f64 {
                    errors.push(format!(
                        "Riesz mode requires 0 < alpha < dim, got alpha = {}",
                        self.kernel.alpha
                    ));
                }
            }
            other => errors.push(format!("kernel.kind {other:?} must be bessel or riesz")),
        }
        if self.grid.n < 2 || !self.grid.n.is_power_of_two() {
            errors.push(format!(
                "grid.n must be a power of two >= 2, got {}",
                self.grid.n
            ));
        }
        if !(self.grid.l.is_finite() && self.grid.l > 0.0) {
            errors.push(format!("grid.l must be positive, got {}", self.grid.l));
        }
        if !(self.s > 1.0) {
            errors.push(format!("s must be > 1, got {}", self.s));
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            errors.push(format!("solver.tol must be in (0, 1), got {}", self.solver.tol));
        }
        if self.solver.max_iters == 0 {
            errors.push("solver.max_iters must be positive".into());
        }
        if self.levels.k_min >= self.levels.k_max {
            errors.push(format!(
                "levels need k_min < k_max, got [{}, {}]",
                self.levels.k_min, self.levels.k_max
            ));
        }
        if self.levels.per_octave == 0 {
            errors.push("levels.per_octave must be >= 1".into());
        }
        if let Some(q) = self.q {
            if !(q > 0.0) {
                errors.push(format!("q must be positive, got {q}"));
            }
        }
        if let Some(p) = self.p {
            if !(p > 1.0) {
                errors.push(format!("p must be > 1, got {p}"));
            }
        }
        match self.mode.as_str() {
            "capacity" => {
                if self.set.is_none() {
                    errors.push("capacity mode needs --set".into());
                }
            }
            "choquet" => {
                if self.field.is_none() {
                    errors.push("choquet mode needs --field".into());
                }
            }
            "maximal" => {
                if self.field.is_none() {
                    errors.push("maximal mode needs --field".into());
                }
            }
            "functional" => match self.which.as_deref() {
                None => errors.push("functional mode needs --which".into()),
                Some(w) => {
                    if !["gamma", "beta", "lambda", "kv", "mult", "measure"].contains(&w) {
                        errors.push(format!(
                            "functional --which {w:?} must be gamma|beta|lambda|kv|mult|measure"
                        ));
                    }
                    if w == "measure" {
                        if self.measure.is_none() {
                            errors.push("functional --which measure needs --measure".into());
                        }
                    } else if self.field.is_none() {
                        errors.push(format!("functional --which {w} needs --field"));
                    }
                    if w == "mult" && self.p.is_none() {
                        errors.push("functional --which mult needs --p".into());
                    }
                }
            },
            "verify" => match self.which.as_deref() {
                None => errors.push("verify mode needs --which".into()),
                Some(w) => match captool_core::verify::InequalityId::parse(w) {
                    None => {
                        errors.push(format!("verify --which {w:?} is not a known inequality"))
                    }
                    Some(captool_core::verify::InequalityId::Thm13Maximal) => {
                        if self.q.is_none() {
                            errors.push("verify --which thm13_maximal needs --q".into());
                        }
                    }
                    Some(_) => {}
                },
            },
            _ => {}
        }
        if let Some(fmt) = &self.format {
            if fmt != "json" && fmt != "csv" {
                errors.push(format!("format {fmt:?} must be json or csv"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Canonical serialized form: `serialize(parse(c)) = normalize(c)`.
    pub fn normalize(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
