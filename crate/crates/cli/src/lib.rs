//! Command-line front end: one subcommand per experiment plus `accept`.
//!
//! Exit codes: 0 success, 1 computational error (or a failed acceptance
//! criterion), 2 configuration error.

pub mod accept;
pub mod commands;
pub mod config;
pub mod emit;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use commands::Experiment;
use config::Resolved;
use error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "rwre", version, about = "Random walks on trees: boundary crossing, capacity, percolation, RWRE")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Worker threads (0 = all cores); never changes results
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Master seed; falls back to the config file, then RWRE_SEED
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent. A manifest is written next to it
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Strict JSON config; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    Walk1d(commands::Walk1d),
    Capacity(commands::Capacity),
    Network(commands::Network),
    Percolate(commands::Percolate),
    Thm42Check(commands::Thm42Check),
    Counterexample(commands::Counterexample),
    Rwre(commands::Rwre),
    Reinforced(commands::Reinforced),
    Stable(commands::Stable),
    Accept(commands::Accept),
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Walk1d(p) => execute(p, &cli.common),
        Command::Capacity(p) => execute(p, &cli.common),
        Command::Network(p) => execute(p, &cli.common),
        Command::Percolate(p) => execute(p, &cli.common),
        Command::Thm42Check(p) => execute(p, &cli.common),
        Command::Counterexample(p) => execute(p, &cli.common),
        Command::Rwre(p) => execute(p, &cli.common),
        Command::Reinforced(p) => execute(p, &cli.common),
        Command::Stable(p) => execute(p, &cli.common),
        Command::Accept(p) => execute(p, &cli.common),
    }
}

/// Everything needed to run once configuration is settled.
pub struct Plan<E> {
    pub params: E,
    pub resolved: Resolved,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

/// Merge flags, config file and environment; fail before any computation.
pub fn plan<E: Experiment>(flags: &E, common: &Common) -> Result<Plan<E>, CliError> {
    let file = match &common.config {
        Some(path) => config::load(path)?,
        None => config::FileConfig::default(),
    };
    if let Some(c) = &file.command {
        if c != E::NAME {
            return Err(CliError::config("command", format!("config is for `{c}`, running `{}`", E::NAME)));
        }
    }
    let mut params: E = config::merge(flags, &file.params)?;
    params.fill();
    let seed = match common.seed.or(file.seed) {
        Some(s) => Some(s),
        None => config::env_seed()?,
    };
    let seed = if params.needs_seed() {
        Some(seed.ok_or_else(|| {
            CliError::config("seed", format!("required; pass --seed, set `seed` in the config or set {}", config::SEED_ENV))
        })?)
    } else {
        None
    };
    let format = common.format.or(file.format).unwrap_or_else(E::default_format);
    if format == Format::Csv && !E::TABLE {
        return Err(CliError::config("format", format!("`{}` writes json only", E::NAME)));
    }
    let resolved = Resolved {
        command: E::NAME.into(),
        seed,
        format,
        params: serde_json::to_value(&params).map_err(|e| CliError::config("config", e))?,
    };
    Ok(Plan { params, resolved, threads: common.threads.or(file.threads).unwrap_or(0), out: common.out.clone().or(file.out) })
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn execute<E: Experiment>(flags: &E, common: &Common) -> Result<i32, CliError> {
    let Plan { params, resolved, threads, out } = plan(flags, common)?;
    let start = Instant::now();
    let seed = resolved.seed;
    let run = rwre_core::par::with_threads(threads, || params.execute(seed))?;
    let digest = resolved.digest();
    let bytes = emit::render(&run.output, resolved.format, &digest)?;
    let io = |path: &Path, e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    match &out {
        Some(path) => {
            std::fs::write(path, &bytes).map_err(|e| io(path, e))?;
            let mut manifest = json!({
                "tool": "rwre",
                "version": env!("CARGO_PKG_VERSION"),
                "command": E::NAME,
                "config": resolved,
                "config_digest": digest,
                "threads": threads,
                "output": path.display().to_string(),
                "wall_clock_seconds": start.elapsed().as_secs_f64(),
            });
            if let Some(extra) = run.manifest {
                manifest["criteria"] = extra;
            }
            let mpath = manifest_path(path);
            std::fs::write(&mpath, emit::to_json_bytes(&manifest)).map_err(|e| io(&mpath, e))?;
        }
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(format!("cannot write stdout: {e}")))?,
    }
    Ok(run.exit)
}

/// Re-derive the digest of an artifact from its manifest and compare it with
/// the digest embedded in the artifact itself.
pub fn verify_artifact(out: &Path) -> Result<bool, CliError> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())));
    let bytes = read(out)?;
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&manifest_path(out))?).map_err(|e| CliError::Io(format!("bad manifest: {e}")))?;
    let resolved = Resolved {
        command: manifest["config"]["command"].as_str().unwrap_or_default().to_string(),
        seed: manifest["config"]["seed"].as_u64(),
        format: serde_json::from_value(manifest["config"]["format"].clone()).map_err(|e| CliError::Io(e.to_string()))?,
        params: manifest["config"]["params"].clone(),
    };
    let digest = resolved.digest();
    Ok(emit::embedded_digest(&bytes).as_deref() == Some(digest.as_str()) && manifest["config_digest"] == digest.as_str())
}
