//! Portfolio selection with trading costs.
//!
//! The objective `½xᵀΛx − rᵀx + δ/2‖x‖² + Σ|x_i − x0_i| + Σ|x_i − x0_i|^{3/2}`
//! over the simplex is split into three resolvent terms (the two trading
//! costs and the simplex) and two gradient terms (the mean-variance part and
//! the ridge).

mod data;
mod experiment;
mod oracle;
mod problem;

use thiserror::Error;

use crate::operators::OperatorError;
use crate::scheme::SchemeError;
use crate::solver::SolverError;

pub use data::{
    estimate_moments, load_returns_csv, parse_returns, sample_simplex, shift_window,
    synthetic_instance, MarketData,
};
pub use experiment::{mean_std, run_experiment, tune_momentum_beta, Case, ExperimentSettings, RunReport};
pub use oracle::oracle_solution;
pub use problem::{build_problem, MarkowitzProblem};

#[derive(Debug, Error)]
pub enum MarkowitzError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("need at least 2 days and 1 asset, got {days} days and {assets} assets")]
    InsufficientData { days: usize, assets: usize },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Io(String),
    #[error("reference solution failed: {0}")]
    OracleFailure(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
