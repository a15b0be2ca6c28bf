//! Batch driver: configuration, initial-data presets, experiment
//! orchestration and file emission. Subcommands: `simulate`, `picard`,
//! `lifespan`, `decay-study`, `stability`, `selftest`.
//!
//! Exit codes distinguish tool failures (nonzero) from physical blow-up
//! during `simulate` (exit 0 with a blow-up record in the report — a
//! scientific result, not a tool failure).

mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "besov-mhd",
    about = "Pseudo-spectral 2D MHD (ideal velocity, diffusive magnetic field) with Besov-space diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key-value config file; omitted keys take defaults.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Override: grid points per dimension (power of two).
    #[arg(long, global = true)]
    resolution: Option<usize>,

    /// Override: time step.
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Override: final time.
    #[arg(long, global = true)]
    tmax: Option<f64>,

    /// Override: output directory.
    #[arg(long, global = true)]
    output_dir: Option<String>,

    /// Override: RNG seed for random initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override: the estimate constant C of the lifespan formula.
    #[arg(long = "constant-C", global = true)]
    constant_c: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Nonlinear run: diagnostics CSV, snapshots, and a run report.
    Simulate,
    /// Linearized iteration: per-iterate trajectories and a convergence CSV.
    Picard,
    /// Evaluate the lifespan formula on the configured initial data.
    Lifespan,
    /// Long run plus exponential decay fits of the magnetic norms.
    DecayStudy,
    /// Perturbation sweep measuring data-to-solution continuity.
    Stability,
    /// Full invariant suite; nonzero exit on any failure.
    Selftest,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, config::ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.resolution {
        cfg.resolution = n;
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    if let Some(t) = cli.tmax {
        cfg.t_max = t;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(c) = cli.constant_c {
        cfg.constant_c = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(cfg: &ExperimentConfig) {
    let from_env = std::env::var("BESOV_MHD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let cap = from_env.unwrap_or(cfg.threads);
    if cap > 0 {
        // Ignore the error if a pool already exists (tests, repeated init).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cap)
            .build_global();
    }
}

fn main() {
    let cli = Cli::parse();
    let cfg = match effective_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    init_threads(&cfg);

    let outcome = match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Picard => commands::picard(&cfg),
        Command::Lifespan => commands::lifespan(&cfg),
        Command::DecayStudy => commands::decay_study(&cfg),
        Command::Stability => commands::stability(&cfg),
        Command::Selftest => commands::selftest(),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
