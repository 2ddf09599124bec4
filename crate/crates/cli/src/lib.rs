//! The `lilklucb` experiment runner.
//!
//! Every command validates its settings, runs its repetitions (optionally on
//! a thread pool) and writes one table per confidence scheme. Output depends
//! only on the settings and the seed.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use thiserror::Error;

use lilklucb_core::{write_output, ExperimentOutput, OutputFormat, SchemeKind};

pub use config::{Cli, Command, Flags, SEED_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<lilklucb_core::Error> for CliError {
    fn from(e: lilklucb_core::Error) -> Self {
        let msg = e.to_string().replace('\n', " ");
        if e.is_io() {
            CliError::Io(msg)
        } else {
            CliError::Config(msg)
        }
    }
}

/// One table, tagged with the scheme that produced it when there is one.
pub struct Emitted {
    pub scheme: Option<SchemeKind>,
    pub output: ExperimentOutput,
}

/// `out.csv` becomes `out_kl.csv` for scheme `kl`.
pub fn scheme_path(path: &Path, scheme: SchemeKind) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{scheme}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{scheme}"),
    };
    path.with_file_name(name)
}

fn render(out: &ExperimentOutput, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => out.to_csv_string(),
        OutputFormat::Json => out.to_json_string(),
    }
}

/// Writes the tables to `output` (suffixed per scheme when several) or stdout.
pub fn emit(tables: &[Emitted], output: Option<&Path>, format: OutputFormat) -> Result<(), CliError> {
    match output {
        Some(path) => {
            for table in tables {
                let target = match table.scheme {
                    Some(s) if tables.len() > 1 => scheme_path(path, s),
                    _ => path.to_path_buf(),
                };
                write_output(&table.output, &target, format)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for table in tables {
                stdout
                    .write_all(render(&table.output, format).as_bytes())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and writes its output.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::Config(first.trim_start_matches("error: ").to_string()));
        }
    };
    let merged = config::merge(cli.command.flags(), std::env::var(SEED_ENV).ok())?;
    let plan = commands::Plan::new(cli.command.name(), &merged)?;
    // without --parallel everything runs on one worker
    let threads = merged.parallel.unwrap_or(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let tables = pool.install(|| plan.execute())?;
    emit(&tables, merged.output.as_deref(), merged.format)
}
