//! `toeplitz-lab`: config ingestion, dispatch and report emission.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::commands::{ExitKind, RunError};
use crate::config::{ConfigError, RunConfig};
use crate::report::{failure_json, report_json, write_file, FailureRecord, Outcome};

#[derive(Parser, Debug)]
#[command(name = "toeplitz-lab", version, about = "Berezin-Toeplitz quantization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Scaling of the four axiom remainders plus the measurement checks.
    VerifyAxioms(RunArgs),
    /// Joint-noise proxies for fuzzy cutoffs of a pair of observables.
    JointNoise(RunArgs),
    /// Noise of a partition of unity against its radius.
    Localization(RunArgs),
    /// Rigidity witnesses and the dimension bound.
    Rigidity(RunArgs),
    /// Composition, rescaling and exactness on the Bargmann plane.
    Bargmann(RunArgs),
    /// Print the plan of a run without computing anything.
    Describe(RunArgs),
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunArgs {
    /// JSON config file
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in config instead of a file
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Dotted override, e.g. --set sphere.ks=[16,32,64]
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "toeplitz-out")]
    pub out: PathBuf,
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Do not read or write space caches
    #[arg(long)]
    pub no_cache: bool,
    #[arg(long, value_enum, default_value_t = Verbosity::Failures)]
    pub print: Verbosity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Verbosity {
    Failures,
    All,
    Quiet,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyAxioms(_) => "verify-axioms",
            Command::JointNoise(_) => "joint-noise",
            Command::Localization(_) => "localization",
            Command::Rigidity(_) => "rigidity",
            Command::Bargmann(_) => "bargmann",
            Command::Describe(_) => "describe",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::VerifyAxioms(a)
            | Command::JointNoise(a)
            | Command::Localization(a)
            | Command::Rigidity(a)
            | Command::Bargmann(a)
            | Command::Describe(a) => a,
        }
    }
}

fn config_error(e: ConfigError) -> RunError {
    RunError::config("config", e.to_string())
}

pub fn load_config(args: &RunArgs) -> Result<RunConfig, RunError> {
    let value = match (&args.config, &args.preset) {
        (Some(path), _) => config::read_value(path).map_err(config_error)?,
        (None, Some(name)) => config::preset(name).map_err(config_error)?,
        (None, None) => return Err(RunError::config("usage", "one of --config FILE or --preset NAME is required")),
    };
    config::resolve(value, &args.overrides, args.seed).map_err(config_error)
}

/// Run one experiment command in-process.
pub fn run(name: &str, cfg: &RunConfig, cache: Option<PathBuf>) -> Result<Outcome, RunError> {
    match name {
        "verify-axioms" => commands::verify_axioms(cfg, cache),
        "joint-noise" => commands::joint_noise(cfg, cache),
        "localization" => commands::localization(cfg, cache),
        "rigidity" => commands::rigidity(cfg, cache),
        "bargmann" => commands::bargmann(cfg, cache),
        other => Err(RunError::config("usage", format!("'{other}' is not an experiment"))),
    }
}

fn write_or_warn(dir: &Path, name: &str, contents: &str) -> bool {
    match write_file(dir, name, contents) {
        Ok(()) => true,
        Err(e) => {
            eprintln!("error: writing {}: {e}", dir.join(name).display());
            false
        }
    }
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn fail(out: Option<&Path>, kind: ExitKind, e: &RunError) -> i32 {
    eprintln!("error: {e}");
    let code = kind as i32;
    if let Some(dir) = out {
        let rec = FailureRecord {
            exit_code: code,
            kind: match kind {
                ExitKind::Assertion => "assertion",
                ExitKind::Config => "config",
                ExitKind::Numerical => "numerical",
            },
            message: Some(e.to_string()),
            failures: vec![],
        };
        write_or_warn(dir, "failures.json", &failure_json(&rec));
    }
    code
}

pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitKind::Config as i32 } else { 0 };
        }
    };
    let command = cli.command;
    let args = command.args().clone();
    let cfg = match load_config(&args) {
        Ok(c) => c,
        Err(e) => return fail(None, e.kind, &e),
    };

    if let Command::Describe(_) = command {
        return match commands::describe(&cfg) {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => fail(None, e.kind, &e),
        };
    }

    let jobs = args.jobs.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => return fail(None, ExitKind::Config, &RunError::config("--jobs", e.to_string())),
    };
    let out = args.out.clone();
    let cache = (!args.no_cache).then(|| out.join("cache"));
    let started = unix_seconds();
    let clock = Instant::now();
    let name = command.name();
    let result = pool.install(|| run(name, &cfg, cache));
    let elapsed = clock.elapsed().as_secs_f64();

    let meta = json!({
        "command": name,
        "started_unix": started,
        "elapsed_seconds": elapsed,
        "jobs": pool.current_num_threads(),
        "config_source": args.config.as_ref().map(|p| p.display().to_string()).or(args.preset.clone().map(|p| format!("preset:{p}"))),
    });
    let mut meta_text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta_text.push('\n');
    write_or_warn(&out, "run-meta.json", &meta_text);

    let outcome = match result {
        Ok(o) => o,
        Err(e) => return fail(Some(&out), e.kind, &e),
    };
    let cfg_value = serde_json::to_value(&cfg).expect("config serializes");
    let mut ok = write_or_warn(&out, "report.json", &report_json(name, &cfg_value, &outcome));
    ok &= write_or_warn(&out, "table.csv", &outcome.table.to_csv());
    if !ok {
        return ExitKind::Config as i32;
    }

    for c in &outcome.checks {
        let show = match args.print {
            Verbosity::All => true,
            Verbosity::Failures => !c.passed,
            Verbosity::Quiet => false,
        };
        if show {
            println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.line());
        }
    }
    let failures = outcome.failures();
    println!(
        "{name}: {} checks, {} failed, {elapsed:.1}s; report in {}",
        outcome.checks.len(),
        failures.len(),
        out.display()
    );
    if failures.is_empty() {
        let _ = std::fs::remove_file(out.join("failures.json"));
        0
    } else {
        let rec = FailureRecord {
            exit_code: ExitKind::Assertion as i32,
            kind: "assertion",
            message: None,
            failures,
        };
        write_or_warn(&out, "failures.json", &failure_json(&rec));
        ExitKind::Assertion as i32
    }
}
