//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{parse_config, OutputFormat, RunConfig};
use crate::experiments::{
    popular_spectrum_config, seed_sweep, strat_vs_stub_config, strategic_spectrum_config,
    ExperimentConfig, Variation, SPECTRUM_HORIZON, STRATEGIC_RHO_GRID, STRAT_VS_STUB_HORIZON,
};
use crate::output::{export_graph, write_experiment, write_metrics_csv, GraphFormat};

pub const THREADS_ENV: &str = "OPINION_SIM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "opinion-sim",
    version,
    about = "Opinion and follow-graph co-evolution with influencer controllers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one seeded simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config step count.
        #[arg(long)]
        steps: Option<usize>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config over a seed ensemble.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `a..b` (half-open), `a..=b`, or a single seed.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: SeedRange,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the named controller experiments.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        #[arg(long, value_parser = parse_seed_range, default_value = "0..20")]
        seeds: SeedRange,
        /// Overrides the experiment's step horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentName {
    PopularSpectrum,
    StrategicSpectrum,
    StratVsStub,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedRange(pub Vec<u64>);

/// Parses `a..b` (half-open), `a..=b` (inclusive), or a single seed.
pub fn parse_seed_range(s: &str) -> Result<SeedRange, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|e| format!("bad seed `{t}`: {e}"))
    };
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        vec![num(s)?]
    };
    if seeds.is_empty() {
        return Err(format!("seed range `{s}` is empty"));
    }
    Ok(SeedRange(seeds))
}

enum Failure {
    Usage(String),
    Runtime(String),
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match build_pool() {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn build_pool() -> Result<rayon::ThreadPool, String> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("{THREADS_ENV}={v}: {e}"))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "{}: ok ({} standard agents, {} controllers, {} topics)",
                config.display(),
                cfg.n_standard,
                cfg.sim_config().controllers.len(),
                cfg.m
            );
            Ok(())
        }
        Command::Run {
            config,
            seed,
            steps,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = steps {
                if s == 0 {
                    return Err(Failure::Usage("--steps must be >= 1".into()));
                }
                cfg.steps = s;
            }
            if let Some(o) = out {
                cfg.output.dir = o;
            }
            run_single(&cfg)
        }
        Command::Sweep { config, seeds, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let mut exp = ExperimentConfig::new(
                "sweep",
                cfg.sim_config(),
                vec![Variation {
                    name: "config".into(),
                    controllers: cfg.sim_config().controllers,
                    eps_edge: None,
                }],
                seeds.0,
                cfg.steps,
            );
            exp.stability = cfg.stability;
            run_experiment(&exp, &dir, "sweep")
        }
        Command::Experiment {
            name,
            seeds,
            horizon,
            out,
        } => {
            if horizon == Some(0) {
                return Err(Failure::Usage("--horizon must be >= 1".into()));
            }
            let (exp, prefix) = match name {
                ExperimentName::PopularSpectrum => (
                    popular_spectrum_config(seeds.0, horizon.unwrap_or(SPECTRUM_HORIZON)),
                    "popular_spectrum",
                ),
                ExperimentName::StrategicSpectrum => (
                    strategic_spectrum_config(
                        seeds.0,
                        horizon.unwrap_or(SPECTRUM_HORIZON),
                        &STRATEGIC_RHO_GRID,
                    ),
                    "strategic_spectrum",
                ),
                ExperimentName::StratVsStub => (
                    strat_vs_stub_config(seeds.0, horizon.unwrap_or(STRAT_VS_STUB_HORIZON)),
                    "strat_vs_stub",
                ),
            };
            run_experiment(&exp, &out, prefix)
        }
    }
}

fn run_single(cfg: &RunConfig) -> Result<(), Failure> {
    let runtime = |e: &dyn std::fmt::Display| Failure::Runtime(e.to_string());
    let mut state = cfg
        .sim_config()
        .init(cfg.seed)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let trajectory = state
        .run(cfg.steps, cfg.stability.as_ref())
        .map_err(|e| runtime(&e))?;
    let dir = &cfg.output.dir;
    for format in &cfg.output.formats {
        let written = match format {
            OutputFormat::Csv => {
                let p = dir.join("metrics.csv");
                write_metrics_csv(&trajectory.metrics, &p).map(|_| p)
            }
            OutputFormat::Dot => {
                let p = dir.join("final.dot");
                export_graph(&state.a, &state.x, &p, GraphFormat::Dot).map(|_| p)
            }
            OutputFormat::Json => {
                let p = dir.join("final.json");
                export_graph(&state.a, &state.x, &p, GraphFormat::AdjacencyJson).map(|_| p)
            }
        }
        .map_err(|e| runtime(&e))?;
        println!("wrote {}", written.display());
    }
    let last = trajectory.metrics.last().expect("steps >= 1");
    println!(
        "step {}: mean opinion {:?}, {} components",
        last.k, last.mean_opinion, last.component_count
    );
    if let Some(k) = trajectory.stabilized_at {
        println!("stable from step {k}");
    }
    Ok(())
}

fn run_experiment(exp: &ExperimentConfig, dir: &Path, prefix: &str) -> Result<(), Failure> {
    let result = seed_sweep(exp).map_err(|e| Failure::Usage(e.to_string()))?;
    let paths =
        write_experiment(&result, dir, prefix).map_err(|e| Failure::Runtime(e.to_string()))?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    for f in &result.failures {
        eprintln!(
            "run failed: variation {} seed {}: {}",
            f.variation, f.seed, f.error
        );
    }
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{} run(s) failed",
            result.failures.len()
        )))
    }
}
