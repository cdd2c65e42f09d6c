use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    build_problem, estimate_moments, oracle_solution, sample_simplex, shift_window, MarketData,
    MarkowitzError, MarkowitzProblem,
};
use crate::deviations::{PolicySpec, ZeroPolicy};
use crate::scheme::{BuiltinScheme, Scheme, SchemeSpec};
use crate::solver::{solve, ParamSchedule, StopRule, Trajectory};
use crate::vecops::dist;

/// Which start position the run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// `x0` uniform on the simplex.
    Case1,
    /// `x0` is the case-1 solution; moments come from the window 20 days later.
    Case2,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
        })
    }
}

/// Everything but the data, the policy and the seed.
#[derive(Clone, Debug)]
pub struct ExperimentSettings {
    pub scheme: SchemeSpec,
    pub schedule: ParamSchedule,
    pub delta: f64,
    /// Stop once `‖x_3^k − x*‖ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual target of the zero-deviation run that cross-checks the oracle.
    pub reference_tol: f64,
    pub reference_max_iter: usize,
    /// Largest admissible gap between the reference run and the oracle.
    pub oracle_agreement: f64,
    pub shift_days: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            scheme: SchemeSpec::Builtin {
                builtin: BuiltinScheme::ChainFb { n: 3, m: 2, gamma: 1.0 },
                theta: 1.0,
                lipschitz: None,
            },
            schedule: ParamSchedule::constant(0.9, 0.9),
            delta: 6.0,
            tol: 1e-8,
            max_iter: 1_000_000,
            reference_tol: 1e-8,
            reference_max_iter: 1_000_000,
            oracle_agreement: 1e-6,
            shift_days: 20,
        }
    }
}

/// Outcome of one solve in the experiment.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub case: Case,
    pub seed: u64,
    pub policy: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_error: f64,
    pub x: Vec<f64>,
    pub x_star: Vec<f64>,
    pub x0: Vec<f64>,
    pub trajectory: Trajectory,
}

impl ExperimentSettings {
    pub fn scheme_for(&self, mp: &MarkowitzProblem) -> Result<Scheme, MarkowitzError> {
        Ok(self.scheme.build(Some(&mp.lipschitz()))?)
    }

    /// The scheme used for every seed of `case`; it depends on the data window only.
    pub fn case_scheme(&self, data: &MarketData, case: Case) -> Result<Scheme, MarkowitzError> {
        let window = match case {
            Case::Case1 => data.clone(),
            Case::Case2 => shift_window(data, self.shift_days)?,
        };
        let (lambda, r) = estimate_moments(&window);
        let p = r.len();
        let mp = MarkowitzProblem::new(lambda, r, self.delta, vec![1.0 / p as f64; p])?;
        self.scheme_for(&mp)
    }

    /// The case-1 instance for `seed`.
    pub fn case1_problem(&self, data: &MarketData, seed: u64) -> Result<MarkowitzProblem, MarkowitzError> {
        let (lambda, r) = estimate_moments(data);
        let x0 = sample_simplex(seed, data.assets());
        MarkowitzProblem::new(lambda, r, self.delta, x0)
    }

    /// The instance of `case` for `seed`, with `x*` of the case-1 instance when `case` is 2.
    pub fn problem(&self, data: &MarketData, case: Case, seed: u64) -> Result<MarkowitzProblem, MarkowitzError> {
        let first = self.case1_problem(data, seed)?;
        match case {
            Case::Case1 => Ok(first),
            Case::Case2 => {
                let x0 = self.reference_solution(&first)?;
                let later = shift_window(data, self.shift_days)?;
                let (lambda, r) = estimate_moments(&later);
                MarkowitzProblem::new(lambda, r, self.delta, x0)
            }
        }
    }

    /// `x*` from the proximal-gradient oracle, cross-checked against a
    /// zero-deviation splitting run stopped at residual `reference_tol`.
    pub fn reference_solution(&self, mp: &MarkowitzProblem) -> Result<Vec<f64>, MarkowitzError> {
        let oracle = oracle_solution(mp)?;
        let problem = build_problem(mp)?;
        let scheme = self.scheme_for(mp)?;
        let stop = StopRule {
            tol: self.reference_tol,
            max_iter: self.reference_max_iter,
            reference: None,
        };
        let out = solve(&problem, &scheme, &self.schedule, &mut ZeroPolicy, &stop)?;
        if !out.converged {
            return Err(MarkowitzError::OracleFailure(format!(
                "reference run stopped at residual {:e} after {} iterations",
                out.trajectory.last().map_or(f64::NAN, |r| r.residual),
                out.iterations
            )));
        }
        let gap = dist(&out.x, &oracle);
        if !(gap <= self.oracle_agreement) {
            return Err(MarkowitzError::OracleFailure(format!(
                "reference run and oracle differ by {gap:e}"
            )));
        }
        Ok(oracle)
    }

    /// Solves `mp` with `policy` until `‖x_3^k − x*‖ < tol`.
    pub fn run_problem(
        &self,
        mp: &MarkowitzProblem,
        x_star: &[f64],
        policy: &PolicySpec,
    ) -> Result<(bool, usize, f64, Vec<f64>, Trajectory), MarkowitzError> {
        let problem = build_problem(mp)?;
        let scheme = self.scheme_for(mp)?;
        let stop = StopRule {
            tol: self.tol,
            max_iter: self.max_iter,
            reference: Some(x_star.to_vec()),
        };
        let mut pol = policy.build();
        let out = solve(&problem, &scheme, &self.schedule, pol.as_mut(), &stop)?;
        let err = dist(&out.x, x_star);
        Ok((out.converged, out.iterations, err, out.x, out.trajectory))
    }
}

/// One experiment run: builds the case instance, computes `x*`, solves with `policy`.
pub fn run_experiment(
    data: &MarketData,
    settings: &ExperimentSettings,
    policy: &PolicySpec,
    case: Case,
    seed: u64,
) -> Result<RunReport, MarkowitzError> {
    let mp = settings.problem(data, case, seed)?;
    let x_star = settings.reference_solution(&mp)?;
    let (converged, iterations, final_error, x, trajectory) = settings.run_problem(&mp, &x_star, policy)?;
    Ok(RunReport {
        case,
        seed,
        policy: policy.to_string(),
        converged,
        iterations,
        final_error,
        x,
        x_star,
        x0: mp.x0,
        trajectory,
    })
}

/// Picks the momentum coefficient with the fewest case-1 iterations on one held-out seed.
/// Ties go to the smaller `β`.
pub fn tune_momentum_beta(
    data: &MarketData,
    settings: &ExperimentSettings,
    held_out_seed: u64,
    betas: &[f64],
    rho: f64,
) -> Result<f64, MarkowitzError> {
    let mp = settings.case1_problem(data, held_out_seed)?;
    let x_star = settings.reference_solution(&mp)?;
    let mut best: Option<(usize, f64)> = None;
    for &beta in betas {
        let policy = PolicySpec::Momentum { beta, rho };
        let (converged, iters, ..) = settings.run_problem(&mp, &x_star, &policy)?;
        if converged && best.is_none_or(|(b, _)| iters < b) {
            best = Some((iters, beta));
        }
    }
    best.map(|(_, beta)| beta)
        .ok_or_else(|| MarkowitzError::InvalidParameter("no momentum coefficient converged".into()))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[usize]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
