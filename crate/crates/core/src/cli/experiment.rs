use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::{base_dir, bad, emit, read, write_atomic, EXIT_ALL_FAILED, EXIT_BAD_INPUT, EXIT_OK};
use crate::deviations::PolicySpec;
use crate::markowitz::{mean_std, tune_momentum_beta, Case, ExperimentSettings, MarketData, MarkowitzError};
use crate::scheme::ExplicitScheme;

pub const TABLE_HEADER: [&str; 6] = ["case", "scheme", "policy", "mean_iters", "std_iters", "n_seeds"];

/// Worker count from `SPLITDEV_THREADS`, defaulting to the available parallelism.
fn thread_count() -> usize {
    std::env::var("SPLITDEV_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone)]
struct SeedRun {
    iterations: usize,
    converged: bool,
    final_error: f64,
    trajectory_csv: String,
}

/// One (scheme, case, seed) job: shared instance and `x*`, one solve per policy.
fn run_job(
    data: &MarketData,
    settings: &ExperimentSettings,
    policies: &[PolicySpec],
    case: Case,
    seed: u64,
) -> Result<Vec<Result<SeedRun, String>>, String> {
    let inner = || -> Result<_, MarkowitzError> {
        let mp = settings.problem(data, case, seed)?;
        let x_star = settings.reference_solution(&mp)?;
        Ok(policies
            .iter()
            .map(|p| {
                settings
                    .run_problem(&mp, &x_star, p)
                    .map(|(converged, iterations, final_error, _, traj)| SeedRun {
                        iterations,
                        converged,
                        final_error,
                        trajectory_csv: traj.to_csv_string(),
                    })
                    .map_err(|e| e.to_string())
            })
            .collect())
    };
    inner().map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CellSummary {
    scheme: String,
    policy: String,
    case: Case,
    seeds: Vec<u64>,
    mean_iters: Option<f64>,
    std_iters: Option<f64>,
    tol: f64,
    iterations: Vec<Option<usize>>,
    final_errors: Vec<Option<f64>>,
    failure: Option<String>,
    scheme_matrices: Option<ExplicitScheme>,
}

pub fn cmd_experiment(path: &Path) -> i32 {
    let text = match read(path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let cfg: ExperimentConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => return bad(format!("{}: {e}", path.display())),
    };
    let seeds = cfg.seeds.seeds();
    if seeds.is_empty() {
        return bad("at least one seed is required");
    }
    if cfg.schemes.is_empty() || cfg.cases.is_empty() || (cfg.policies.is_empty() && cfg.tune.is_none()) {
        return bad("schemes, policies and cases must be non-empty");
    }
    if let Err(e) = cfg.schedule.check(cfg.max_iter) {
        return bad(e);
    }
    let base_policies = match cfg.parsed_policies() {
        Ok(p) => p,
        Err(e) => return bad(e),
    };
    let base = base_dir(path);
    let data = match cfg.data.load(&base) {
        Ok(d) => d,
        Err(e) => return bad(e),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build() {
        Ok(p) => p,
        Err(e) => return bad(e),
    };

    // per-scheme policy lists, extended by the tuned momentum policy when requested
    let mut grid: Vec<(ExperimentSettings, Vec<PolicySpec>)> = Vec::new();
    for scheme in &cfg.schemes {
        let settings = cfg.settings(scheme);
        let mut policies = base_policies.clone();
        if let Some(t) = &cfg.tune {
            match pool.install(|| tune_momentum_beta(&data, &settings, t.held_out_seed, &t.betas, t.rho)) {
                Ok(beta) => policies.push(PolicySpec::Momentum { beta, rho: t.rho }),
                Err(e) => eprintln!("warning: tuning failed for {}: {e}", scheme.describe()),
            }
        }
        grid.push((settings, policies));
    }

    let mut jobs: Vec<(usize, Case, u64)> = Vec::new();
    for s in 0..grid.len() {
        for &case in &cfg.cases {
            jobs.extend(seeds.iter().map(|&seed| (s, case, seed)));
        }
    }
    let results: Vec<Result<Vec<Result<SeedRun, String>>, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, case, seed)| run_job(&data, &grid[s].0, &grid[s].1, case, seed))
            .collect()
    });

    let out_dir = base.join(&cfg.output_dir);
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(TABLE_HEADER).expect("in-memory write");
    let mut cells = Vec::new();
    let mut any_ok = false;

    for (s, (settings, policies)) in grid.iter().enumerate() {
        let scheme_name = settings.scheme.describe();
        for (ci, &case) in cfg.cases.iter().enumerate() {
            let scheme_matrices = settings.case_scheme(&data, case).ok().map(|sc| sc.to_explicit());
            for (pi, policy) in policies.iter().enumerate() {
                let mut iterations = Vec::new();
                let mut errors = Vec::new();
                let mut failure = None;
                for (si, &seed) in seeds.iter().enumerate() {
                    let idx = (s * cfg.cases.len() + ci) * seeds.len() + si;
                    debug_assert_eq!(jobs[idx], (s, case, seed));
                    let run = match &results[idx] {
                        Ok(per_policy) => per_policy[pi].clone(),
                        Err(e) => Err(e.clone()),
                    };
                    match run {
                        Ok(r) => {
                            if cfg.write_trajectories {
                                let name = format!("runs/{case}_s{s}_p{pi}_seed{seed}.csv");
                                if let Err(e) = write_atomic(&out_dir.join(name), r.trajectory_csv.as_bytes()) {
                                    eprintln!("error: writing trajectory: {e}");
                                    return EXIT_BAD_INPUT;
                                }
                            }
                            if r.converged {
                                iterations.push(Some(r.iterations));
                            } else {
                                iterations.push(None);
                                failure.get_or_insert(format!("seed {seed}: no convergence within max_iter"));
                            }
                            errors.push(Some(r.final_error));
                        }
                        Err(e) => {
                            iterations.push(None);
                            errors.push(None);
                            failure.get_or_insert(format!("seed {seed}: {e}"));
                        }
                    }
                }
                let (mean, std) = if failure.is_none() {
                    any_ok = true;
                    let its: Vec<usize> = iterations.iter().flatten().copied().collect();
                    let (m, s) = mean_std(&its);
                    (Some(m), Some(s))
                } else {
                    (None, None)
                };
                let fmt = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |x| format!("{x}"));
                table
                    .write_record([
                        case.to_string(),
                        scheme_name.clone(),
                        policy.to_string(),
                        fmt(mean),
                        fmt(std),
                        seeds.len().to_string(),
                    ])
                    .expect("in-memory write");
                cells.push(CellSummary {
                    scheme: scheme_name.clone(),
                    policy: policy.to_string(),
                    case,
                    seeds: seeds.clone(),
                    mean_iters: mean,
                    std_iters: std,
                    tol: cfg.tol,
                    iterations,
                    final_errors: errors,
                    failure,
                    scheme_matrices: scheme_matrices.clone(),
                });
            }
        }
    }

    let table = table.into_inner().expect("in-memory flush");
    let summary = serde_json::to_string_pretty(&cells).expect("summary serializes");
    let written = write_atomic(&out_dir.join("experiment.csv"), &table)
        .and_then(|_| write_atomic(&out_dir.join("summary.json"), summary.as_bytes()));
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return EXIT_BAD_INPUT;
    }
    emit(String::from_utf8_lossy(&table).trim_end());
    if any_ok {
        EXIT_OK
    } else {
        EXIT_ALL_FAILED
    }
}
