//! Command-line flags, the JSON config file and their resolution into
//! validated settings.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use lilklucb_core::{ColumnMap, OutputFormat, SchemeKind, DEFAULT_STAR_MAP};

use crate::CliError;

pub const SEED_ENV: &str = "LILKLUCB_SEED";

#[derive(Debug, Parser)]
#[command(name = "lilklucb", version, about = "Best-arm identification experiments with anytime KL confidence bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Membership curves of the UCB race on a parametric Bernoulli instance.
    Simulate(Flags),
    /// Membership curves on bootstrapped caption-contest votes.
    Replay(Flags),
    /// Repeated lil-KLUCB runs with error rate and sample counts.
    Identify(Flags),
    /// Hardness sums S_KL and S_SG with fitted log-log slopes.
    Table1(Flags),
    /// Monte-Carlo violation rates of the confidence sequences.
    Coverage(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Replay(_) => "replay",
            Command::Identify(_) => "identify",
            Command::Table1(_) => "table1",
            Command::Coverage(_) => "coverage",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Simulate(f)
            | Command::Replay(f)
            | Command::Identify(f)
            | Command::Table1(f)
            | Command::Coverage(f) => f,
        }
    }
}

/// Every flag is optional; values from `--config` take precedence.
#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// Confidence schemes, comma separated: kl, kl-prime, sg1, sg2.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<SchemeKind>,
    /// Number of arms (a comma-separated list for table1).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Mean-profile exponent (a comma-separated list for table1).
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Explicit arm means, overriding --n/--alpha.
    #[arg(long, value_delimiter = ',')]
    pub means: Vec<f64>,
    /// True means of the coverage streams.
    #[arg(long, value_delimiter = ',')]
    pub mu: Vec<f64>,
    /// Total sampling budget.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Repetitions (trajectories for coverage).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// The N parameter of the confidence sequences (a power of two).
    #[arg(long = "bound-n")]
    pub bound_n: Option<u32>,
    /// Size of the empirical top set checked for the best arm.
    #[arg(long)]
    pub k: Option<usize>,
    /// Base seed; falls back to $LILKLUCB_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run repetitions on a thread pool (all cores when no count is given).
    #[arg(long, num_args = 0..=1, default_missing_value = "0")]
    pub parallel: Option<usize>,
    /// Contest CSV for replay.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file; stdout when absent. Multiple schemes add a `_<scheme>` suffix.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<OutputFormat>,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Samples between membership snapshots (default 2n).
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    /// Stream length for coverage.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Grid size of the sample-complexity evaluator.
    #[arg(long)]
    pub grid_points: Option<usize>,
}

/// Contents of a `--config` file. Keys mirror the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    #[serde(default, deserialize_with = "one_or_many")]
    pub scheme: Option<Vec<SchemeKind>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub n: Option<Vec<usize>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub alpha: Option<Vec<f64>>,
    pub means: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub mu: Option<Vec<f64>>,
    pub budget: Option<u64>,
    pub reps: Option<usize>,
    pub delta: Option<f64>,
    pub bound_n: Option<u32>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub parallel: Option<usize>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub snapshot_every: Option<u64>,
    pub horizon: Option<u64>,
    pub grid_points: Option<usize>,
    /// Column names of the contest CSV.
    pub columns: Option<ColumnMap>,
    /// Rewards of 1, 2 and 3 star votes.
    pub star_map: Option<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(de: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Flags merged with the config file, before command-specific checks.
#[derive(Clone, Debug)]
pub struct Merged {
    pub schemes: Vec<SchemeKind>,
    pub n: Vec<usize>,
    pub alpha: Vec<f64>,
    pub means: Vec<f64>,
    pub mu: Vec<f64>,
    pub budget: Option<u64>,
    pub reps: Option<usize>,
    pub delta: Option<f64>,
    pub bound_n: Option<u32>,
    pub k: Option<usize>,
    pub seed: u64,
    pub parallel: Option<usize>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub snapshot_every: Option<u64>,
    pub horizon: Option<u64>,
    pub grid_points: Option<usize>,
    pub columns: ColumnMap,
    pub star_map: [f64; 3],
}

fn list<T: Clone>(config: Option<Vec<T>>, flag: &[T]) -> Vec<T> {
    config.unwrap_or_else(|| flag.to_vec())
}

/// `env_seed` is the value of [`SEED_ENV`], if set.
pub fn merge(flags: &Flags, env_seed: Option<String>) -> Result<Merged, CliError> {
    let file = match &flags.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    let seed = match file.seed.or(flags.seed) {
        Some(s) => s,
        None => match env_seed {
            Some(raw) => raw.trim().parse().map_err(|_| {
                CliError::Config(format!("{SEED_ENV}=`{raw}` is not an unsigned 64-bit integer"))
            })?,
            None => 0,
        },
    };
    Ok(Merged {
        schemes: list(file.scheme, &flags.scheme),
        n: list(file.n, &flags.n),
        alpha: list(file.alpha, &flags.alpha),
        means: list(file.means, &flags.means),
        mu: list(file.mu, &flags.mu),
        budget: file.budget.or(flags.budget),
        reps: file.reps.or(flags.reps),
        delta: file.delta.or(flags.delta),
        bound_n: file.bound_n.or(flags.bound_n),
        k: file.k.or(flags.k),
        seed,
        parallel: file.parallel.or(flags.parallel),
        input: file.input.or_else(|| flags.input.clone()),
        output: file.output.or_else(|| flags.output.clone()),
        format: file.format.or(flags.format).unwrap_or(OutputFormat::Csv),
        snapshot_every: file.snapshot_every.or(flags.snapshot_every),
        horizon: file.horizon.or(flags.horizon),
        grid_points: file.grid_points.or(flags.grid_points),
        columns: file.columns.unwrap_or_default(),
        star_map: file.star_map.unwrap_or(DEFAULT_STAR_MAP),
    })
}
