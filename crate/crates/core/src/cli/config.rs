use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deviations::PolicySpec;
use crate::markowitz::{
    load_returns_csv, synthetic_instance, Case, ExperimentSettings, MarketData, MarkowitzError,
};
use crate::operators::{CocoerciveOp, MonotoneOp, OperatorError, Problem};
use crate::scheme::{BuiltinScheme, SchemeSpec};
use crate::solver::{ParamSchedule, Rate};

fn default_gamma() -> f64 {
    0.9
}
fn default_xi() -> f64 {
    0.9
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    1_000_000
}
fn default_delta() -> f64 {
    6.0
}
fn default_policy() -> String {
    "zero".into()
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A constant or a `c / (k + 1)^p`-type decaying sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateConfig {
    Constant(f64),
    Decay { start: f64, power: f64, floor: f64 },
}

impl RateConfig {
    fn to_rate(&self) -> Rate {
        match *self {
            RateConfig::Constant(v) => Rate::Constant(v),
            RateConfig::Decay { start, power, floor } => {
                Rate::Sequence(Arc::new(move |k| (start / ((k + 1) as f64).powf(power)).max(floor)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_gamma_rate")]
    pub gamma: RateConfig,
    #[serde(default = "default_xi_rate")]
    pub xi: RateConfig,
    /// Overrides the θ of the scheme spec when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_gamma_rate() -> RateConfig {
    RateConfig::Constant(default_gamma())
}
fn default_xi_rate() -> RateConfig {
    RateConfig::Constant(default_xi())
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            gamma: default_gamma_rate(),
            xi: default_xi_rate(),
            theta: None,
            epsilon: default_epsilon(),
        }
    }
}

impl ScheduleConfig {
    pub fn to_schedule(&self) -> ParamSchedule {
        ParamSchedule {
            gamma: self.gamma.to_rate(),
            xi: self.xi.to_rate(),
            epsilon: self.epsilon,
        }
    }

    /// Checks the bounds on the first `horizon` terms.
    pub fn check(&self, horizon: usize) -> Result<(), String> {
        if let Some(t) = self.theta {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("theta must be positive, got {t}"));
            }
        }
        let s = self.to_schedule();
        for k in 0..horizon.min(10_000) + 1 {
            s.gamma_at(k).map_err(|e| e.to_string())?;
            s.xi_at(k).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn apply_theta(&self, scheme: SchemeSpec) -> SchemeSpec {
        match self.theta {
            Some(t) => scheme.with_theta(t),
            None => scheme,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic {
        seed: u64,
        #[serde(default = "default_days")]
        days: usize,
        #[serde(default = "default_assets")]
        assets: usize,
    },
}

fn default_days() -> usize {
    200
}
fn default_assets() -> usize {
    53
}

impl DataSource {
    /// Relative CSV paths are resolved against `base`.
    pub fn load(&self, base: &Path) -> Result<MarketData, MarkowitzError> {
        match self {
            DataSource::Csv(p) => load_returns_csv(base.join(p)),
            DataSource::Synthetic { seed, days, assets } => synthetic_instance(*seed, *days, *assets),
        }
    }
}

fn default_centers() -> Vec<Vec<f64>> {
    vec![vec![1.0], vec![-1.0]]
}

/// Problems a run config can describe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `F_i = ∂½‖x − c_i‖²` and `B_j = L_j(x − e_j)`; the zero is a weighted mean.
    Quadratic {
        #[serde(default = "default_centers")]
        centers: Vec<Vec<f64>>,
        #[serde(default)]
        forward_centers: Vec<Vec<f64>>,
        #[serde(default)]
        forward_lipschitz: Vec<f64>,
    },
    Markowitz {
        data: DataSource,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        x0_seed: u64,
        #[serde(default = "default_case")]
        case: Case,
    },
}

fn default_case() -> Case {
    Case::Case1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Stop on the distance to the known solution instead of the residual.
    #[serde(default)]
    pub use_reference: bool,
}

impl Default for StopConfig {
    fn default() -> Self {
        StopConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
            use_reference: false,
        }
    }
}

/// One `solve` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_policy")]
    pub policy: String,
    #[serde(default)]
    pub stop: StopConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

/// A resolved problem with its known solution, when one is available.
pub struct BuiltProblem {
    pub problem: Problem,
    pub reference: Option<Vec<f64>>,
}

impl ProblemConfig {
    pub fn build(&self, base: &Path, schedule: &ScheduleConfig, scheme: &SchemeSpec) -> Result<BuiltProblem, String> {
        match self {
            ProblemConfig::Quadratic {
                centers,
                forward_centers,
                forward_lipschitz,
            } => quadratic_problem(centers, forward_centers, forward_lipschitz).map_err(|e| e.to_string()),
            ProblemConfig::Markowitz {
                data,
                delta,
                x0_seed,
                case,
            } => {
                let data = data.load(base).map_err(|e| e.to_string())?;
                let settings = ExperimentSettings {
                    scheme: scheme.clone(),
                    schedule: schedule.to_schedule(),
                    delta: *delta,
                    ..Default::default()
                };
                let mp = settings.problem(&data, *case, *x0_seed).map_err(|e| e.to_string())?;
                let reference = crate::markowitz::oracle_solution(&mp).map_err(|e| e.to_string())?;
                let problem = crate::markowitz::build_problem(&mp).map_err(|e| e.to_string())?;
                Ok(BuiltProblem {
                    problem,
                    reference: Some(reference),
                })
            }
        }
    }
}

fn quadratic_problem(
    centers: &[Vec<f64>],
    forward_centers: &[Vec<f64>],
    lipschitz: &[f64],
) -> Result<BuiltProblem, OperatorError> {
    let dim = centers.first().map_or(0, Vec::len);
    if centers.iter().chain(forward_centers).any(|c| c.len() != dim) {
        return Err(OperatorError::InvalidProblem("all centers must share one dimension".into()));
    }
    if forward_centers.len() != lipschitz.len() {
        return Err(OperatorError::InvalidProblem(
            "forward_centers and forward_lipschitz must have equal length".into(),
        ));
    }
    let resolvents = centers
        .iter()
        .map(|c| {
            let c = c.clone();
            MonotoneOp::new("quadratic", move |d, y| {
                y.iter().zip(&c).map(|(yi, ci)| (yi + d * ci) / (1.0 + d)).collect()
            })
        })
        .collect();
    let forwards = forward_centers
        .iter()
        .zip(lipschitz)
        .map(|(e, &l)| {
            let e = e.clone();
            CocoerciveOp::new("scaled_shift", l, move |x| {
                x.iter().zip(&e).map(|(xi, ei)| l * (xi - ei)).collect()
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let weight = centers.len() as f64 + lipschitz.iter().sum::<f64>();
    let reference = (0..dim)
        .map(|t| {
            let a: f64 = centers.iter().map(|c| c[t]).sum();
            let b: f64 = forward_centers.iter().zip(lipschitz).map(|(e, l)| l * e[t]).sum();
            (a + b) / weight
        })
        .collect();
    Ok(BuiltProblem {
        problem: Problem::new(dim, resolvents, forwards)?,
        reference: Some(reference),
    })
}

fn default_policies() -> Vec<String> {
    vec!["zero".into()]
}
fn default_cases() -> Vec<Case> {
    vec![Case::Case1]
}
fn default_schemes() -> Vec<SchemeSpec> {
    vec![SchemeSpec::Builtin {
        builtin: BuiltinScheme::ChainFb { n: 3, m: 2, gamma: 1.0 },
        theta: 1.0,
        lipschitz: None,
    }]
}
fn default_exp_max_iter() -> usize {
    1_000_000
}
fn default_reference_tol() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedConfig {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedConfig {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedConfig::List(v) => v.clone(),
            SeedConfig::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

/// Picks `β` for an extra momentum policy on a held-out seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub held_out_seed: u64,
    pub betas: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_rho() -> f64 {
    crate::deviations::MomentumPolicy::DEFAULT_RHO
}

/// The `experiment` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default = "default_cases")]
    pub cases: Vec<Case>,
    pub seeds: SeedConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_exp_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneConfig>,
    #[serde(default = "default_true")]
    pub write_trajectories: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn settings(&self, scheme: &SchemeSpec) -> ExperimentSettings {
        ExperimentSettings {
            scheme: self.schedule.apply_theta(scheme.clone()),
            schedule: self.schedule.to_schedule(),
            delta: self.delta,
            tol: self.tol,
            max_iter: self.max_iter,
            reference_tol: self.reference_tol,
            ..Default::default()
        }
    }

    pub fn parsed_policies(&self) -> Result<Vec<PolicySpec>, String> {
        self.policies
            .iter()
            .map(|p| p.parse::<PolicySpec>().map_err(|e| e.to_string()))
            .collect()
    }
}
