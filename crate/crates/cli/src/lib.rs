//! Command-line harness: configuration, experiment subcommands and
//! deterministic CSV / JSON output.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use thiserror::Error;

pub use commands::{run_command, Command, CommandOutput, Context};
pub use config::RunConfig;
pub use output::{Cell, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] hypflow_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "hypflow", version, about = "Flows and equidistribution experiments on the Bolza surface")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Flat `key = value` configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Reduced grids for CI
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    quick: bool,
    threads: usize,
    wall_time_s: f64,
    config: std::collections::BTreeMap<String, String>,
    files: Vec<String>,
    failures: &'a [String],
}

/// Resolves the configuration from a file and the command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::parse(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if cli.quick {
        cfg = cfg.quick();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

/// Runs one subcommand and writes its tables plus `manifest.json` under
/// `<out>/<command>/`. Returns the failed invariants.
pub fn execute(cmd: Command, cfg: RunConfig, quick: bool) -> Result<Vec<String>, CliError> {
    let start = Instant::now();
    let ctx = Context::new(cfg)?;
    let out = run_command(cmd, &ctx)?;
    let dir = ctx.cfg.out.join(cmd.name());
    write_outputs(&dir, cmd, &ctx, &out, quick, start.elapsed().as_secs_f64())?;
    Ok(out.failures)
}

fn write_outputs(
    dir: &Path,
    cmd: Command,
    ctx: &Context,
    out: &CommandOutput,
    quick: bool,
    wall: f64,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for t in &out.tables {
        files.extend(t.write(dir)?);
    }
    let manifest = Manifest {
        command: cmd.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: ctx.cfg.seed,
        quick,
        threads: rayon::current_num_threads(),
        wall_time_s: wall,
        config: ctx.cfg.echo(),
        files,
        failures: &out.failures,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}
