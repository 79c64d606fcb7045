//! Experiment runner: layered TOML configuration, seeded sweeps in a worker
//! pool, CSV and manifest output, replay and paired comparison.

pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, ConfigError, Layers};
use crate::experiments::{run_plan, Experiment, Plan};
use crate::output::{compare_pair, write_run, Manifest};

/// Exit code of a completed run.
pub const EXIT_OK: i32 = 0;
/// Exit code for configuration and I/O errors.
pub const EXIT_CONFIG: i32 = 1;
/// Exit code when no run produced a feasible allocation.
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "uavnoma", version = output::version(), about = "Energy-efficiency experiments for a wireless-powered multi-antenna UAV serving NOMA pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its CSV and manifest.
    Run(RunArgs),
    /// Run the configuration stored in a manifest again.
    Replay {
        manifest: PathBuf,
        /// Output directory [default: `replay/` next to the manifest].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Paired per-seed statistics of the first manifest against the others.
    Compare {
        #[arg(required = true, num_args = 2..)]
        manifests: Vec<PathBuf>,
        /// Scheme taken from the first manifest [default: its first scheme].
        #[arg(long)]
        scheme_a: Option<String>,
        /// Scheme taken from the other manifests [default: their first scheme].
        #[arg(long)]
        scheme_b: Option<String>,
    },
    /// List experiments with their axes and default schemes.
    Experiments,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub experiment: Option<String>,
    /// Number of seeds.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Output directory; `UAVNOMA_OUT` takes precedence.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// `key=value`, dotted keys reach nested tables; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Outcome of one executed configuration.
pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub exit_code: i32,
}

/// Runs `cfg`, writes the outputs into `out` and reports to stderr.
pub fn execute(cfg: &Config, out: &Path, jobs: usize) -> Result<RunSummary, CliError> {
    let plan = Plan::new(cfg)?;
    let rows = run_plan(cfg, &plan, jobs);
    let (manifest_path, manifest) = write_run(out, cfg, &plan, &rows)?;
    let any_ok = rows.iter().any(|r| r.ee.is_some());
    eprintln!(
        "{}: {} rows in {} ({} warnings)",
        manifest.experiment,
        manifest.rows,
        out.display(),
        manifest.warnings
    );
    Ok(RunSummary {
        manifest_path,
        manifest,
        exit_code: if any_ok { EXIT_OK } else { EXIT_INFEASIBLE },
    })
}

fn run(args: RunArgs) -> Result<i32, CliError> {
    let layers = Layers {
        experiment: args.experiment,
        seeds: args.seeds,
        overrides: args.overrides,
    };
    let cfg = config::load(args.config.as_deref(), &layers)?;
    let out = std::env::var_os("UAVNOMA_OUT").map_or(args.out, PathBuf::from);
    Ok(execute(&cfg, &out, args.jobs.unwrap_or_else(default_jobs))?.exit_code)
}

fn replay(manifest: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> Result<i32, CliError> {
    let m = Manifest::read(manifest)?;
    let cfg = Config::from_toml(&m.config)?;
    if cfg.sha256() != m.config_sha256 {
        return Err(CliError::Other(format!(
            "{}: config does not match its hash",
            manifest.display()
        )));
    }
    let out = out.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("replay"));
    Ok(execute(&cfg, &out, jobs.unwrap_or_else(default_jobs))?.exit_code)
}

fn compare(paths: &[PathBuf], scheme_a: Option<&str>, scheme_b: Option<&str>) -> Result<i32, CliError> {
    let manifests = paths.iter().map(|p| Manifest::read(p)).collect::<Result<Vec<_>, _>>()?;
    let a = (paths[0].as_path(), &manifests[0]);
    for (p, m) in paths.iter().zip(&manifests).skip(1) {
        let c = compare_pair(a, (p, m), scheme_a, scheme_b)?;
        println!("# {} vs {}", paths[0].display(), p.display());
        print!("{}", c.csv());
    }
    Ok(EXIT_OK)
}

fn list() -> i32 {
    for e in Experiment::ALL {
        let schemes: Vec<&str> = e.default_schemes().iter().map(|s| s.name()).collect();
        println!(
            "{:<24} axis: {:<8} schemes: {}",
            e.name(),
            e.axis().join(","),
            schemes.join(",")
        );
    }
    EXIT_OK
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Replay { manifest, out, jobs } => replay(&manifest, out, jobs),
        Command::Compare {
            manifests,
            scheme_a,
            scheme_b,
        } => compare(&manifests, scheme_a.as_deref(), scheme_b.as_deref()),
        Command::Experiments => Ok(list()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
