//! Command-line front end.
//!
//! ```text
//! splitdev validate <scheme.json>    exit 0 valid, 1 invalid, 2 unreadable
//! splitdev solve <run.json>          exit 0 converged, 1 invalid scheme, 2 bad config,
//!                                         3 max_iter reached, 4 divergence or budget violation
//! splitdev experiment <exp.json>     exit 0 done, 2 bad config, 5 every cell failed
//! ```
//!
//! All artifacts go under the config's `output_dir`, written to a temporary
//! file and renamed into place. `SPLITDEV_THREADS` caps the worker pool.

mod config;
mod experiment;
mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::deviations::PolicySpec;
use crate::scheme::{ExplicitScheme, SchemeError, SchemeSpec};
use crate::solver::{solve, SolverError, StopRule};

pub use config::{
    DataSource, ExperimentConfig, ProblemConfig, RateConfig, RunConfig, ScheduleConfig, SeedConfig,
    StopConfig, TuneConfig,
};
pub use output::write_atomic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_SCHEME: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_MAX_ITER: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_ALL_FAILED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "splitdev", version, about = "Frugal splitting with deviations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scheme against every structural condition and print the report.
    Validate { scheme: PathBuf },
    /// Run one solve from a config file.
    Solve { config: PathBuf },
    /// Run a (scheme × policy × case) grid over seeds.
    Experiment { config: PathBuf },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Validate { scheme } => cmd_validate(&scheme),
        Command::Solve { config } => cmd_solve(&config),
        Command::Experiment { config } => experiment::cmd_experiment(&config),
    }
}

fn read(path: &Path) -> Result<String, i32> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_BAD_INPUT
    })
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Prints the validation report as JSON.
pub fn cmd_validate(path: &Path) -> i32 {
    let text = match read(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let report = SchemeSpec::from_json(&text).and_then(|spec| spec.report(None));
    match report {
        Ok(r) => {
            emit(&serde_json::to_string_pretty(&r).expect("report serializes"));
            if r.passed() {
                EXIT_OK
            } else {
                EXIT_INVALID_SCHEME
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_BAD_INPUT
        }
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    status: &'a str,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    final_dist_to_ref: Option<f64>,
    tol: f64,
    policy: String,
    scheme_name: String,
    scheme: ExplicitScheme,
    x: Vec<f64>,
    reference: Option<Vec<f64>>,
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn bad(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_BAD_INPUT
}

/// Runs one config; writes `trajectory.csv` and `summary.json`.
pub fn cmd_solve(path: &Path) -> i32 {
    let text = match read(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let cfg: RunConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => return bad(format!("{}: {e}", path.display())),
    };
    if let Err(e) = cfg.schedule.check(cfg.stop.max_iter) {
        return bad(e);
    }
    if !(cfg.stop.tol >= 0.0) {
        return bad("stop.tol must be nonnegative");
    }
    let policy: PolicySpec = match cfg.policy.parse() {
        Ok(p) => p,
        Err(e) => return bad(e),
    };
    let base = base_dir(path);
    let spec = cfg.schedule.apply_theta(cfg.scheme.clone());
    let built = match cfg.problem.build(&base, &cfg.schedule, &spec) {
        Ok(b) => b,
        Err(e) => return bad(e),
    };
    let lipschitz = built.problem.lipschitz();
    let scheme = match spec.build(Some(&lipschitz)) {
        Ok(s) => s,
        Err(SchemeError::Parse(e)) => return bad(e),
        Err(e) => {
            eprintln!("error: scheme rejected: {e}");
            if let Ok(r) = spec.report(Some(&lipschitz)) {
                emit(&serde_json::to_string_pretty(&r).expect("report serializes"));
            }
            return EXIT_INVALID_SCHEME;
        }
    };
    let stop = StopRule {
        tol: cfg.stop.tol,
        max_iter: cfg.stop.max_iter,
        reference: if cfg.stop.use_reference { built.reference.clone() } else { None },
    };
    let mut pol = policy.build();
    let outcome = match solve(&built.problem, &scheme, &cfg.schedule.to_schedule(), pol.as_mut(), &stop) {
        Ok(o) => o,
        Err(e @ (SolverError::Divergence { .. } | SolverError::BudgetViolation { .. })) => {
            eprintln!("error: {e}");
            return EXIT_DIVERGED;
        }
        Err(e) => return bad(e),
    };
    let last = outcome.trajectory.last();
    let final_dist_to_ref = built
        .reference
        .as_ref()
        .map(|r| crate::vecops::dist(&outcome.x, r));
    let summary = SolveSummary {
        status: if outcome.converged { "converged" } else { "max_iter" },
        converged: outcome.converged,
        iterations: outcome.iterations,
        final_residual: last.map_or(f64::NAN, |r| r.residual),
        final_dist_to_ref,
        tol: cfg.stop.tol,
        policy: policy.to_string(),
        scheme_name: spec.describe(),
        scheme: scheme.to_explicit(),
        x: outcome.x.clone(),
        reference: built.reference,
    };
    let out_dir = base.join(&cfg.output_dir);
    let written = write_atomic(&out_dir.join("trajectory.csv"), outcome.trajectory.to_csv_string().as_bytes())
        .and_then(|_| {
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            write_atomic(&out_dir.join("summary.json"), json.as_bytes())
        });
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return EXIT_BAD_INPUT;
    }
    if outcome.converged {
        EXIT_OK
    } else {
        EXIT_MAX_ITER
    }
}
