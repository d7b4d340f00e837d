//! Command-line pipeline for evaluating gridded DJF Rx5Day extremes:
//! remap, block maxima, nonstationary GEV fits with bootstrap ensembles,
//! station-based masks and bias/Taylor evaluation.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use tracing::{error, warn};

use config::PipelineConfig;
use error::{Failure, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_OK};
use stages::Outcome;

#[derive(Debug, Parser)]
#[command(name = "xtreval", version, about = "Evaluate simulated precipitation extremes against a gridded reference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; replaces the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output root; replaces the configured out_dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Conservatively remap daily stores onto the target grid.
    Remap,
    /// DJF Rx5Day block maxima.
    Rx5day,
    /// GEV fits, return values and bootstrap ensembles.
    Fit,
    /// Station-based masks.
    Mask,
    /// Bias and Taylor statistics per region and approach.
    Evaluate,
    /// Generate a synthetic scenario and its pipeline configuration.
    Synth,
    /// Every applicable stage in order.
    All,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None if cli.command == Command::Synth => {
            serde_json::from_str::<PipelineConfig>("{}").map_err(|e| Failure::Config(e.to_string()))?
        }
        None => return Err(Failure::Config("--config is required".into())),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if cli.command == Command::Synth && cfg.scenario.is_none() {
        return Err(Failure::Config("synth needs a scenario in the configuration".into()));
    }
    Ok(cfg)
}

fn has_daily(cfg: &PipelineConfig) -> bool {
    cfg.products.values().any(|p| p.daily.is_some())
}

/// Run one command; the outcomes of the stages that ran.
pub fn execute(cli: &Cli, cfg: &PipelineConfig) -> Result<Vec<Outcome>> {
    Ok(match cli.command {
        Command::Remap => vec![stages::remap(cfg)?],
        Command::Rx5day => vec![stages::rx5day(cfg)?],
        Command::Fit => vec![stages::fit(cfg)?],
        Command::Mask => vec![stages::mask(cfg)?],
        Command::Evaluate => vec![stages::evaluate(cfg)?],
        Command::Synth => vec![stages::synth(cfg, cli.seed)?],
        Command::All => {
            let mut v = Vec::new();
            if has_daily(cfg) {
                if cfg.target_grid.is_some() {
                    v.push(stages::remap(cfg)?);
                }
                v.push(stages::rx5day(cfg)?);
            }
            v.push(stages::fit(cfg)?);
            v.push(stages::mask(cfg)?);
            v.push(stages::evaluate(cfg)?);
            v
        }
    })
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_writer(std::io::stderr).try_init();
}

/// Parse-free entry point; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    init_logging();
    let cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return EXIT_CONFIG;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            error!("--workers must be positive");
            return EXIT_CONFIG;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            error!("thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(cli, &cfg)) {
        Ok(outcomes) => {
            let warnings: Vec<&String> = outcomes.iter().flat_map(|o| &o.warnings).collect();
            for w in &warnings {
                warn!("convergence: {w}");
            }
            if warnings.is_empty() {
                EXIT_OK
            } else {
                EXIT_CONVERGENCE
            }
        }
        Err(e) => {
            error!("{e:#}");
            error::exit_code(&e)
        }
    }
}

/// Parse `args` (program name first) and run.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}
