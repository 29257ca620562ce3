//! `captool`: capacities, Choquet integrals, capacitary functionals, the
//! local maximal operator, and inequality verification sweeps on grids.

mod commands;
mod config;
mod io;
mod report;

use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, GridCfg, KernelCfg, LevelsCfg, SolverCfg, SCHEMA_VERSION};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "captool",
    about = "Grid toolkit for Bessel/Riesz capacities, Choquet integrals, and \
             capacitary inequality verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Kernel kind: bessel or riesz
    #[arg(long, default_value = "bessel")]
    kind: String,
    /// Kernel order alpha
    #[arg(long)]
    alpha: f64,
    /// Ambient dimension (1, 2, or 3)
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Capacity exponent s (> 1)
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    /// Grid points per axis (power of two)
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Half extent L of the cube [-L, L]^dim
    #[arg(long, default_value_t = 4.0)]
    l: f64,
    /// Relative duality-gap tolerance of capacity solves
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Iteration cap per solve
    #[arg(long, default_value_t = 80_000)]
    max_iters: usize,
    /// RNG seed for test families
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads (default: all logical cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Report output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json, or csv to add a per-sample table
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct LevelArgs {
    /// Choquet level range as k_min:k_max (levels 2^k)
    #[arg(long, default_value = "-12:6", allow_hyphen_values = true)]
    levels: String,
    /// Levels per octave (1 = dyadic, 4 = quarter octave)
    #[arg(long, default_value_t = 1)]
    per_octave: u32,
}

impl LevelArgs {
    fn parse(&self) -> Result<LevelsCfg, String> {
        let text = self.levels.trim();
        // k_min:k_max with a possibly negative k_min
        let split_at = text[1..]
            .find(':')
            .map(|i| i + 1)
            .ok_or_else(|| format!("levels must be k_min:k_max, got {text:?}"))?;
        let k_min: i32 =
            text[..split_at].parse().map_err(|e| format!("levels k_min: {e}"))?;
        let k_max: i32 =
            text[split_at + 1..].parse().map_err(|e| format!("levels k_max: {e}"))?;
        Ok(LevelsCfg { k_min, k_max, per_octave: self.per_octave })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Capacity of a set with the extremal-measure identities
    Capacity {
        #[command(flatten)]
        common: CommonArgs,
        /// Set DSL: box:lo,hi[;lo,hi...] or ball:c[,c...];r, joined by +
        #[arg(long)]
        set: String,
    },
    /// Layer-cake Choquet integral of a field
    Choquet {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        levels: LevelArgs,
        /// Field file (binary layout, or .json)
        #[arg(long)]
        field: PathBuf,
    },
    /// One of the capacitary functionals
    Functional {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        levels: LevelArgs,
        /// gamma | beta | lambda | kv | mult | measure
        #[arg(long)]
        which: String,
        #[arg(long)]
        field: Option<PathBuf>,
        /// Explicit beta density (beta evaluates at it instead of building
        /// the witness)
        #[arg(long)]
        density: Option<PathBuf>,
        /// Atomic measure JSON (for --which measure)
        #[arg(long)]
        measure: Option<PathBuf>,
        /// Multiplier norm exponent p (> 1)
        #[arg(long)]
        p: Option<f64>,
        /// Projected-gradient polish steps for the beta/lambda witness
        #[arg(long)]
        polish: Option<usize>,
        /// Where to write the witness field
        #[arg(long)]
        out_field: Option<PathBuf>,
    },
    /// Local Hardy-Littlewood maximal function of a field
    Maximal {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        field: PathBuf,
        /// "auto" or comma-separated extra radii in (0, 1]
        #[arg(long, default_value = "auto")]
        radii: String,
        /// Also report sup M[(K f)^{1/q}] / (K f)^{1/q} for this q
        #[arg(long)]
        dominate_q: Option<f64>,
        /// Where to write the maximal field
        #[arg(long)]
        out_field: Option<PathBuf>,
    },
    /// Sweep one inequality over a seeded test family
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        levels: LevelArgs,
        /// Inequality id (mazya, capstrong, gfl1c, thm12_band,
        /// lemma31_bessel, vwh_riesz, thm13_maximal, quasi_add,
        /// two_sided_kernel, mvn_chain)
        #[arg(long)]
        which: String,
        /// Power q (thm13)
        #[arg(long)]
        q: Option<f64>,
        /// Samples per family
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Re-run at 2N and attach the refinement drift
        #[arg(long, default_value_t = false)]
        refine: bool,
        /// gnuplot-friendly ratio histogram output path
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Kernel diagnostics: golden-value probes, table monotonicity, and the
    /// two-sided comparability constants
    KernelCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Where to write the kernel table (binary layout)
        #[arg(long)]
        out_field: Option<PathBuf>,
    },
    /// Execute a JSON experiment configuration
    Run {
        /// Configuration file
        #[arg(long)]
        config: PathBuf,
    },
}

fn base_config(common: &CommonArgs, mode: &str) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        mode: mode.into(),
        kernel: KernelCfg {
            kind: common.kind.clone(),
            alpha: common.alpha,
            dim: common.dim,
        },
        grid: GridCfg { n: common.n, l: common.l },
        solver: SolverCfg {
            tol: common.tol,
            max_iters: common.max_iters,
            seed: common.seed,
        },
        levels: LevelsCfg::default(),
        s: common.s,
        q: None,
        p: None,
        set: None,
        field: None,
        density: None,
        measure: None,
        which: None,
        samples: None,
        refine: false,
        radii: None,
        dominate_q: None,
        polish: None,
        jobs: common.jobs,
        out: common.out.clone(),
        out_field: None,
        format: common.format.clone(),
        histogram: None,
    }
}

fn build_config(command: &Command) -> Result<ExperimentConfig, String> {
    Ok(match command {
        Command::Capacity { common, set } => {
            let mut cfg = base_config(common, "capacity");
            cfg.set = Some(set.clone());
            cfg
        }
        Command::Choquet { common, levels, field } => {
            let mut cfg = base_config(common, "choquet");
            cfg.levels = levels.parse()?;
            cfg.field = Some(field.clone());
            cfg
        }
        Command::Functional {
            common,
            levels,
            which,
            field,
            density,
            measure,
            p,
            polish,
            out_field,
        } => {
            let mut cfg = base_config(common, "functional");
            cfg.levels = levels.parse()?;
            cfg.which = Some(which.clone());
            cfg.field = field.clone();
            cfg.density = density.clone();
            cfg.measure = measure.clone();
            cfg.p = *p;
            cfg.polish = *polish;
            cfg.out_field = out_field.clone();
            cfg
        }
        Command::Maximal { common, field, radii, dominate_q, out_field } => {
            let mut cfg = base_config(common, "maximal");
            cfg.field = Some(field.clone());
            cfg.radii = Some(radii.clone());
            cfg.dominate_q = *dominate_q;
            cfg.out_field = out_field.clone();
            cfg
        }
        Command::Verify { common, levels, which, q, samples, refine, histogram } => {
            let mut cfg = base_config(common, "verify");
            cfg.levels = levels.parse()?;
            cfg.which = Some(which.clone());
            cfg.q = *q;
            cfg.samples = Some(*samples);
            cfg.refine = *refine;
            cfg.histogram = histogram.clone();
            cfg
        }
        Command::KernelCheck { common, out_field } => {
            let mut cfg = base_config(common, "kernel-check");
            cfg.out_field = out_field.clone();
            cfg
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| format!("reading {}: {e}", config.display()))?;
            serde_json::from_str(&text).map_err(|e| {
                format!(
                    "parsing {} at line {}, column {}: {e}",
                    config.display(),
                    e.line(),
                    e.column()
                )
            })?
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli.command) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(commands::EXIT_CONFIG as u8);
        }
    };
    match commands::execute(&config) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
