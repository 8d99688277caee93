//! Command-line front end: loads a scenario, runs one or more seeds, writes
//! CSV metrics, and compares output directories.

pub mod compare;
pub mod output;

use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sky3d::scenario::{self, BUILTIN_NAMES};
use sky3d::{EngineError, RunSummary, Scenario, ScenarioError};
use thiserror::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVARIANT: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("unknown builtin scenario `{name}` (valid: {})", BUILTIN_NAMES.join(", "))]
    UnknownBuiltin { name: String },
    #[error("{}: {source}", path.display())]
    Scenario {
        path: PathBuf,
        source: ScenarioError,
    },
    #[error("invalid seed range `{0}`: expected `a..b` or `a..=b` with a < b")]
    SeedRange(String),
    #[error("seed {seed}: {source}")]
    Engine { seed: u64, source: EngineError },
    #[error(transparent)]
    Config(EngineError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine {
                source: EngineError::Invariant { .. },
                ..
            } => EXIT_INVARIANT,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sky3d",
    version,
    about = "Hybrid satellite / aerial 5G NR access simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write metrics.csv and summary.csv.
    Run(RunArgs),
    /// Compare the summary.csv files of two output directories.
    Compare { a: PathBuf, b: PathBuf },
    /// Print a scenario as TOML.
    Scenario(SourceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "builtin")]
    pub scenario: Option<PathBuf>,
    /// Builtin scenario name; `paper` when neither source is given.
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Seed; defaults to the scenario's own.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seed range, `a..b` (half-open) or `a..=b`; seeds run in parallel.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Remove every intervening (mobile) AP.
    #[arg(long)]
    pub no_mobile_aps: bool,
    /// Association strategy name.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub tick_s: Option<f64>,
    #[arg(long)]
    pub duration_s: Option<f64>,
}

pub fn parse_seed_range(text: &str) -> Result<Range<u64>, CliError> {
    let err = || CliError::SeedRange(text.to_string());
    let (a, b, inclusive) = if let Some((a, b)) = text.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = text.split_once("..") {
        (a, b, false)
    } else {
        return Err(err());
    };
    let a: u64 = a.trim().parse().map_err(|_| err())?;
    let b: u64 = b.trim().parse().map_err(|_| err())?;
    let end = if inclusive {
        b.checked_add(1).ok_or_else(err)?
    } else {
        b
    };
    if a >= end {
        return Err(err());
    }
    Ok(a..end)
}

pub fn load_scenario(source: &SourceArgs) -> Result<Scenario, CliError> {
    match (&source.scenario, &source.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            scenario::parse_scenario(&text).map_err(|source| CliError::Scenario {
                path: path.clone(),
                source,
            })
        }
        (None, name) => {
            let name = name.as_deref().unwrap_or("paper");
            scenario::builtin(name).ok_or_else(|| CliError::UnknownBuiltin {
                name: name.to_string(),
            })
        }
    }
}

/// Scenario with the command-line overrides applied, plus the seeds to run.
pub fn prepare(args: &RunArgs) -> Result<(Scenario, Vec<u64>), CliError> {
    let mut s = load_scenario(&args.source)?;
    if args.no_mobile_aps {
        s = s.without_mobile_aps();
    }
    if let Some(name) = &args.strategy {
        s.association.strategy = name.clone();
    }
    if let Some(t) = args.tick_s {
        s.tick_s = t;
    }
    if let Some(d) = args.duration_s {
        s.duration_s = d;
        if s.arrival_window_s > d {
            log::warn!("arrival window shortened to the {d} s run");
            s.arrival_window_s = d;
        }
    }
    // Surfaces bad names and values before any seed starts.
    sky3d::Simulation::new(s.clone()).map_err(CliError::Config)?;
    let seeds = match (&args.seeds, args.seed) {
        (Some(range), _) => parse_seed_range(range)?.collect(),
        (None, Some(seed)) => vec![seed],
        (None, None) => vec![s.seed],
    };
    Ok((s, seeds))
}

/// Runs one seed and writes `<out>/seed<N>/{metrics,summary}.csv`.
pub fn run_seed(scenario: &Scenario, seed: u64, out: &Path) -> Result<RunSummary, CliError> {
    let mut s = scenario.clone();
    s.seed = seed;
    let result = sky3d::run(&s).map_err(|source| CliError::Engine { seed, source })?;
    let dir = out.join(format!("seed{seed}"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    output::write_metrics(
        &dir.join("metrics.csv"),
        s.aps.len(),
        s.ues.len(),
        &result.frames,
    )?;
    output::write_summary(
        &dir.join("summary.csv"),
        std::slice::from_ref(&result.summary),
    )?;
    log::info!(
        "seed {seed}: rejections {} drops {} handovers {}",
        result.summary.rejections,
        result.summary.drops,
        result.summary.handovers
    );
    Ok(result.summary)
}

pub fn cmd_run(args: &RunArgs) -> Result<Vec<RunSummary>, CliError> {
    let (scenario, seeds) = prepare(args)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let results: Vec<Result<RunSummary, CliError>> = seeds
        .par_iter()
        .map(|&seed| run_seed(&scenario, seed, &args.out))
        .collect();
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    output::write_summary(&args.out.join("summary.csv"), &summaries)?;
    Ok(summaries)
}

pub fn cmd_compare(a: &Path, b: &Path) -> Result<String, CliError> {
    let c = compare::compare_dirs(a, b)?;
    Ok(c.render(&a.display().to_string(), &b.display().to_string()))
}

pub fn cmd_scenario(source: &SourceArgs) -> Result<String, CliError> {
    let s = load_scenario(source)?;
    s.to_toml().map_err(|source| CliError::Scenario {
        path: PathBuf::from("<stdout>"),
        source,
    })
}
