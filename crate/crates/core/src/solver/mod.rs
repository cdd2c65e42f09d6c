//! The iteration engine.
//!
//! One iteration computes the block iterate `x^k` by a single sequential sweep,
//!
//! ```text
//! x_i = J_{d_i F_i}( −d_i Σ_{j<i} S_ij x_j + d_i Σ_j M_ij (z_j + v_j)
//!                    − d_i Σ_j C_ij B_j(Σ_{h<i} Q_jh x_h + u_j) ),
//! ```
//!
//! then updates `z^{k+1} = z^k − γ_k Mᵀ⊛x^k`, measures
//! `l_k² = (1−γ_k)/γ_k · ‖z^{k+1} − z^k + γ_k/(1−γ_k) v^k‖²` and asks the
//! deviation policy for `(u^{k+1}, v^{k+1})` within the budget `ξ_k l_k²`.
//!
//! Each `B_j` is evaluated lazily at the first row with `C_ij ≠ 0`; the
//! scheme's staircase vector guarantees its input blocks already exist, so an
//! iteration costs exactly `n` resolvents and `m` forward evaluations.

mod trajectory;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::deviations::{deviation_cost, DeviationPolicy, DeviationWindow};
use crate::operators::{MonotoneOp, Problem};
use crate::scheme::Scheme;
use crate::vecops::{all_finite, axpy, blocks_dist_sq, blocks_norm_sq, dist, norm, zeros};

pub use trajectory::{IterationRecord, Trajectory, CSV_HEADER};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("scheme does not match problem: {0}")]
    Mismatch(String),
    #[error("parameter schedule out of bounds: {0}")]
    Schedule(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("deviation at iteration {k} costs {cost:e} but the budget is {budget:e}")]
    BudgetViolation { k: usize, cost: f64, budget: f64 },
    #[error("deviation policy returned blocks of the wrong shape: {0}")]
    DeviationShape(String),
    #[error("iterates diverged at iteration {k} (residual {residual:e})")]
    Divergence { k: usize, residual: f64 },
}

/// A parameter sequence indexed by the iteration counter.
#[derive(Clone)]
pub enum Rate {
    Constant(f64),
    Sequence(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl Rate {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Rate::Constant(v) => *v,
            Rate::Sequence(f) => f(k),
        }
    }
}

impl fmt::Debug for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Constant(v) => write!(f, "Constant({v})"),
            Rate::Sequence(_) => write!(f, "Sequence(..)"),
        }
    }
}

/// Relaxation `γ_k` and budget fraction `ξ_k`, bounded by `ε`:
/// `ε <= γ_k <= 1 − ε` and `0 <= ξ_k <= 1 − ε`.
///
/// `θ` is a property of the [`Scheme`], which was validated against it.
#[derive(Clone, Debug)]
pub struct ParamSchedule {
    pub gamma: Rate,
    pub xi: Rate,
    pub epsilon: f64,
}

impl Default for ParamSchedule {
    fn default() -> Self {
        ParamSchedule {
            gamma: Rate::Constant(0.9),
            xi: Rate::Constant(0.9),
            epsilon: 1e-3,
        }
    }
}

impl ParamSchedule {
    pub fn constant(gamma: f64, xi: f64) -> Self {
        ParamSchedule {
            gamma: Rate::Constant(gamma),
            xi: Rate::Constant(xi),
            ..Default::default()
        }
    }

    pub fn gamma_at(&self, k: usize) -> Result<f64, SolverError> {
        let g = self.gamma.at(k);
        let eps = self.epsilon;
        if eps > 0.0 && g >= eps && g <= 1.0 - eps {
            Ok(g)
        } else {
            Err(SolverError::Schedule(format!("gamma_{k} = {g} outside [{eps}, {}]", 1.0 - eps)))
        }
    }

    pub fn xi_at(&self, k: usize) -> Result<f64, SolverError> {
        let x = self.xi.at(k);
        let eps = self.epsilon;
        if eps > 0.0 && x >= 0.0 && x <= 1.0 - eps {
            Ok(x)
        } else {
            Err(SolverError::Schedule(format!("xi_{k} = {x} outside [0, {}]", 1.0 - eps)))
        }
    }
}

/// Termination rule.
#[derive(Clone, Debug, PartialEq)]
pub struct StopRule {
    pub tol: f64,
    pub max_iter: usize,
    /// When set, stop on `‖x_n^k − x*‖ < tol` instead of the fixed-point residual.
    pub reference: Option<Vec<f64>>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            tol: 1e-8,
            max_iter: 1_000_000,
            reference: None,
        }
    }
}

pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
pub const BUDGET_RTOL: f64 = 1e-12;

/// Iteration state between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    /// Number of completed iterations.
    pub k: usize,
    /// `z^k`, `n − 1` blocks.
    pub z: Vec<Vec<f64>>,
    /// Last computed block iterate `x^{k−1}`, `n` blocks (zeros before the first step).
    pub x: Vec<Vec<f64>>,
    /// `u^k`, `m` blocks.
    pub u: Vec<Vec<f64>>,
    /// `v^k`, `n − 1` blocks.
    pub v: Vec<Vec<f64>>,
    /// `l_{k−1}²` (zero before the first step).
    pub l2: f64,
    /// `ξ_{k−1}` (zero before the first step).
    pub xi_prev: f64,
    /// Forward-operator inputs of the last iteration.
    pub forward_inputs: Option<Vec<Vec<f64>>>,
}

impl SolverState {
    /// `z^0 = 0`, `u^0 = 0`, `v^0 = 0`.
    pub fn new(scheme: &Scheme, dim: usize) -> Self {
        Self::with_initial_z(scheme, zeros(scheme.n() - 1, dim))
    }

    pub fn with_initial_z(scheme: &Scheme, z: Vec<Vec<f64>>) -> Self {
        let dim = z.first().map_or(0, Vec::len);
        SolverState {
            k: 0,
            x: zeros(scheme.n(), dim),
            u: zeros(scheme.num_forward(), dim),
            v: zeros(scheme.n() - 1, dim),
            z,
            l2: 0.0,
            xi_prev: 0.0,
            forward_inputs: None,
        }
    }

    /// The consensus estimate `x_n`.
    pub fn solution(&self) -> &[f64] {
        self.x.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// `ξ_k l_k²`, the right-hand side of the deviation inequality.
pub fn deviation_budget(l2: f64, xi: f64) -> Result<f64, SolverError> {
    if !(l2 >= 0.0) || !(xi >= 0.0) || !l2.is_finite() || !xi.is_finite() {
        return Err(SolverError::InvalidInput(format!(
            "budget inputs must be nonnegative, got l2 = {l2}, xi = {xi}"
        )));
    }
    Ok(xi * l2)
}

/// `Mᵀ⊛x`: block `j` is `Σ_i M_ij x_i`.
pub fn apply_mt(scheme: &Scheme, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = scheme.m_matrix();
    let dim = x.first().map_or(0, Vec::len);
    (0..m.ncols())
        .map(|j| {
            let mut out = vec![0.0; dim];
            for (i, xi) in x.iter().enumerate() {
                let c = m[(i, j)];
                if c != 0.0 {
                    axpy(&mut out, c, xi);
                }
            }
            out
        })
        .collect()
}

/// `max_{i,j} ‖x_i − x_j‖`.
pub fn consensus_spread(x: &[Vec<f64>]) -> f64 {
    let mut spread: f64 = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            spread = spread.max(dist(&x[i], &x[j]));
        }
    }
    spread
}

/// `max(‖Mᵀ⊛x‖, spread of x)` for the last computed block iterate.
pub fn fixed_point_residual(state: &SolverState, scheme: &Scheme) -> f64 {
    block_residual(scheme, &state.x)
}

pub(crate) fn block_residual(scheme: &Scheme, x: &[Vec<f64>]) -> f64 {
    blocks_norm_sq(&apply_mt(scheme, x)).sqrt().max(consensus_spread(x))
}

struct Sweep {
    x: Vec<Vec<f64>>,
    forward_inputs: Vec<Vec<f64>>,
    resolvent_calls: usize,
    forward_calls: usize,
}

/// One sequential pass computing `x` from the shifted lifted point `z + v`.
fn sweep(problem: &Problem, scheme: &Scheme, zv: &[Vec<f64>], u: &[Vec<f64>]) -> Sweep {
    let n = scheme.n();
    let nf = scheme.num_forward();
    let dim = problem.dim();
    let (s, m, c, q) = (scheme.s_matrix(), scheme.m_matrix(), scheme.c_matrix(), scheme.q_matrix());
    let d = scheme.stepsizes();

    let mut x: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut forward_out: Vec<Option<Vec<f64>>> = vec![None; nf];
    let mut forward_inputs = zeros(nf, dim);
    let mut resolvent_calls = 0;
    let mut forward_calls = 0;

    for i in 0..n {
        let mut y = vec![0.0; dim];
        for (j, xj) in x.iter().enumerate() {
            let coef = s[(i, j)];
            if coef != 0.0 {
                axpy(&mut y, -d[i] * coef, xj);
            }
        }
        for (j, zj) in zv.iter().enumerate() {
            let coef = m[(i, j)];
            if coef != 0.0 {
                axpy(&mut y, d[i] * coef, zj);
            }
        }
        for j in 0..nf {
            let coef = c[(i, j)];
            if coef == 0.0 {
                continue;
            }
            if forward_out[j].is_none() {
                let mut input = u[j].clone();
                for (h, xh) in x.iter().enumerate() {
                    let w = q[(j, h)];
                    if w != 0.0 {
                        axpy(&mut input, w, xh);
                    }
                }
                debug_assert!((i..n).all(|h| q[(j, h)] == 0.0), "causality guarantees Q[j, h>=i] = 0");
                forward_out[j] = Some(problem.forwards()[j].eval(&input));
                forward_inputs[j] = input;
                forward_calls += 1;
            }
            axpy(&mut y, -d[i] * coef, forward_out[j].as_ref().expect("just evaluated"));
        }
        x.push(problem.resolvents()[i].resolvent(d[i], &y));
        resolvent_calls += 1;
    }
    Sweep {
        x,
        forward_inputs,
        resolvent_calls,
        forward_calls,
    }
}

fn check_compatible(problem: &Problem, scheme: &Scheme) -> Result<(), SolverError> {
    if problem.n() != scheme.n() || problem.m() != scheme.num_forward() {
        return Err(SolverError::Mismatch(format!(
            "problem has n = {}, m = {}; scheme has n = {}, m = {}",
            problem.n(),
            problem.m(),
            scheme.n(),
            scheme.num_forward()
        )));
    }
    let lp = problem.lipschitz();
    for (j, (a, b)) in lp.iter().zip(scheme.lipschitz()).enumerate() {
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
            return Err(SolverError::Mismatch(format!(
                "B_{j} has L = {a} but the scheme was validated with {b}"
            )));
        }
    }
    Ok(())
}

/// Advances `state` by one iteration.
pub fn step(
    state: &mut SolverState,
    problem: &Problem,
    scheme: &Scheme,
    schedule: &ParamSchedule,
    policy: &mut dyn DeviationPolicy,
) -> Result<IterationRecord, SolverError> {
    check_compatible(problem, scheme)?;
    let k = state.k;
    let dim = problem.dim();
    if state.z.len() != scheme.n() - 1 || state.z.iter().any(|b| b.len() != dim) {
        return Err(SolverError::Mismatch(format!(
            "z must hold {} blocks of length {dim}",
            scheme.n() - 1
        )));
    }
    let gamma = schedule.gamma_at(k)?;
    let xi = schedule.xi_at(k)?;
    let gamma_next = schedule.gamma_at(k + 1)?;

    let zv: Vec<Vec<f64>> = state
        .z
        .iter()
        .zip(&state.v)
        .map(|(z, v)| z.iter().zip(v).map(|(a, b)| a + b).collect())
        .collect();
    let sw = sweep(problem, scheme, &zv, &state.u);

    let mtx = apply_mt(scheme, &sw.x);
    let mut z_next = state.z.clone();
    for (zj, mj) in z_next.iter_mut().zip(&mtx) {
        axpy(zj, -gamma, mj);
    }

    // l_k² = (1−γ)/γ ‖z^{k+1} − z^k + γ/(1−γ) v^k‖²
    let ratio = gamma / (1.0 - gamma);
    let mut shifted_step = 0.0;
    let mut step_sq = 0.0;
    for ((zn, zo), v) in z_next.iter().zip(&state.z).zip(&state.v) {
        for ((a, b), c) in zn.iter().zip(zo).zip(v) {
            let dz = a - b;
            step_sq += dz * dz;
            let t = dz + ratio * c;
            shifted_step += t * t;
        }
    }
    let l2 = shifted_step / ratio;
    let budget = deviation_budget(l2, xi)?;

    let residual = blocks_norm_sq(&mtx).sqrt().max(consensus_spread(&sw.x));
    if !residual.is_finite()
        || residual > DIVERGENCE_THRESHOLD
        || !sw.x.iter().all(|b| all_finite(b))
        || !l2.is_finite()
    {
        return Err(SolverError::Divergence { k, residual });
    }

    let window = DeviationWindow {
        k,
        z_prev: &state.z,
        z_next: &z_next,
        forward_inputs: &sw.forward_inputs,
        prev_forward_inputs: state.forward_inputs.as_deref(),
        budget,
        gamma_next,
        theta: scheme.theta(),
        lipschitz: scheme.lipschitz(),
    };
    let dev = policy.propose(&window);
    let shape_ok = dev.u.len() == scheme.num_forward()
        && dev.v.len() == scheme.n() - 1
        && dev.u.iter().chain(&dev.v).all(|b| b.len() == dim);
    if !shape_ok {
        return Err(SolverError::DeviationShape(policy.name()));
    }
    let cost = deviation_cost(&dev, gamma_next, scheme.theta(), scheme.lipschitz());
    if !(cost <= budget + BUDGET_RTOL * (1.0 + budget)) {
        return Err(SolverError::BudgetViolation { k, cost, budget });
    }

    let record = IterationRecord {
        k,
        residual,
        spread: consensus_spread(&sw.x),
        step_norm: step_sq.sqrt(),
        l2,
        xi,
        budget,
        budget_used: cost,
        resolvent_calls: sw.resolvent_calls,
        forward_calls: sw.forward_calls,
        dist_to_ref: None,
    };

    state.k = k + 1;
    state.z = z_next;
    state.x = sw.x;
    state.u = dev.u;
    state.v = dev.v;
    state.l2 = l2;
    state.xi_prev = xi;
    state.forward_inputs = Some(sw.forward_inputs);
    Ok(record)
}

/// Result of [`solve`].
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// `x_n` of the last iteration.
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub trajectory: Trajectory,
    pub state: SolverState,
}

/// Iterates from `z^0 = 0` until the stop rule fires.
pub fn solve(
    problem: &Problem,
    scheme: &Scheme,
    schedule: &ParamSchedule,
    policy: &mut dyn DeviationPolicy,
    stop: &StopRule,
) -> Result<SolveOutcome, SolverError> {
    solve_from(SolverState::new(scheme, problem.dim()), problem, scheme, schedule, policy, stop)
}

/// Like [`solve`] from a caller-provided initial state.
pub fn solve_from(
    mut state: SolverState,
    problem: &Problem,
    scheme: &Scheme,
    schedule: &ParamSchedule,
    policy: &mut dyn DeviationPolicy,
    stop: &StopRule,
) -> Result<SolveOutcome, SolverError> {
    check_compatible(problem, scheme)?;
    if let Some(r) = &stop.reference {
        if r.len() != problem.dim() {
            return Err(SolverError::InvalidInput(format!(
                "reference has length {}, expected {}",
                r.len(),
                problem.dim()
            )));
        }
    }
    let mut trajectory = Trajectory::default();
    let mut converged = false;
    while state.k < stop.max_iter {
        let mut record = step(&mut state, problem, scheme, schedule, policy)?;
        record.dist_to_ref = stop.reference.as_ref().map(|r| dist(state.solution(), r));
        let done = match record.dist_to_ref {
            Some(d) => d < stop.tol,
            None => record.residual <= stop.tol,
        };
        trajectory.records.push(record);
        if done {
            converged = true;
            break;
        }
    }
    Ok(SolveOutcome {
        x: state.solution().to_vec(),
        converged,
        iterations: trajectory.len(),
        trajectory,
        state,
    })
}

/// Deviation-free sweep from `z`; at a fixed point every block equals the zero of the sum.
pub fn inner_pass(problem: &Problem, scheme: &Scheme, z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let u = zeros(scheme.num_forward(), problem.dim());
    sweep(problem, scheme, z, &u).x
}

/// Recovers the solution candidate `x_n` from a lifted point.
pub fn extract_solution(problem: &Problem, scheme: &Scheme, z: &[Vec<f64>]) -> Vec<f64> {
    inner_pass(problem, scheme, z).pop().unwrap_or_default()
}

/// `‖z − z'‖²` over all blocks.
pub fn lifted_dist_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    blocks_dist_sq(a, b)
}

/// One step of classical Douglas–Rachford:
/// `x1 = J_{γF1}(z)`, `x2 = J_{γF2}(2x1 − z)`, `z⁺ = z − λ(x1 − x2)`.
pub fn dr_reference_step(
    z: &[f64],
    gamma: f64,
    lambda: f64,
    f1: &MonotoneOp,
    f2: &MonotoneOp,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x1 = f1.resolvent(gamma, z);
    let reflected: Vec<f64> = x1.iter().zip(z).map(|(a, b)| 2.0 * a - b).collect();
    let x2 = f2.resolvent(gamma, &reflected);
    let z_next = z
        .iter()
        .zip(x1.iter().zip(&x2))
        .map(|(zi, (a, b))| zi - lambda * (a - b))
        .collect();
    (x1, x2, z_next)
}

/// Euclidean norm, re-exported for diagnostics.
pub fn vec_norm(a: &[f64]) -> f64 {
    norm(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviations::{MomentumPolicy, ZeroPolicy};
    use crate::operators::CocoerciveOp;
    use crate::scheme::BuiltinScheme;

    /// F(x) = x − a, resolvent (y + d a)/(1 + d).
    fn shifted_identity(a: f64) -> MonotoneOp {
        MonotoneOp::new("shifted_identity", move |d, y| {
            y.iter().map(|v| (v + d * a) / (1.0 + d)).collect()
        })
    }

    fn quadratic_pair() -> Problem {
        Problem::new(1, vec![shifted_identity(1.0), shifted_identity(-1.0)], vec![]).unwrap()
    }

    #[test]
    fn dr_single_step_matches_hand_computation() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        let schedule = ParamSchedule::constant(0.5, 0.5);
        let mut state = SolverState::with_initial_z(&scheme, vec![vec![0.7]]);
        step(&mut state, &problem, &scheme, &schedule, &mut ZeroPolicy).unwrap();
        // z̄ = √2·0.7; x1 = (z̄+1)/2; x2 = (2x1 − z̄ − 1)/2; z̄⁺ = z̄ − (x1 − x2)
        let zb = 2f64.sqrt() * 0.7;
        let x1 = (zb + 1.0) / 2.0;
        let x2 = (2.0 * x1 - zb - 1.0) / 2.0;
        let zb_next = zb - (x1 - x2);
        assert!((state.x[0][0] - x1).abs() < 1e-15);
        assert!((state.x[1][0] - x2).abs() < 1e-15);
        assert!((state.z[0][0] * 2f64.sqrt() - zb_next).abs() < 1e-15);
    }

    #[test]
    fn l2_with_zero_deviation() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        let schedule = ParamSchedule::constant(0.9, 0.5);
        let mut state = SolverState::new(&scheme, 1);
        let z0 = state.z.clone();
        let rec = step(&mut state, &problem, &scheme, &schedule, &mut ZeroPolicy).unwrap();
        let dz2 = lifted_dist_sq(&state.z, &z0);
        assert!((rec.l2 - dz2 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn zero_xi_forces_zero_deviation() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        let schedule = ParamSchedule::constant(0.5, 0.0);
        let mut state = SolverState::new(&scheme, 1);
        let mut pol = MomentumPolicy::new(1.0, 1.0).unwrap();
        for _ in 0..5 {
            let rec = step(&mut state, &problem, &scheme, &schedule, &mut pol).unwrap();
            assert_eq!(rec.budget, 0.0);
            assert_eq!(state.v, vec![vec![0.0]]);
        }
    }

    #[test]
    fn budget_examples() {
        assert!((deviation_budget(9.0, 1.0 / 3.0).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(deviation_budget(5.0, 0.0).unwrap(), 0.0);
        assert!((deviation_budget(1.0 / 9.0, 0.9).unwrap() - 0.1).abs() < 1e-16);
        assert!(deviation_budget(-1.0, 0.5).is_err());
        assert!(deviation_budget(1.0, -0.5).is_err());
    }

    #[test]
    fn residual_examples() {
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        let mut state = SolverState::new(&scheme, 2);
        state.x = vec![vec![0.3, -1.0], vec![0.3, -1.0]];
        assert!(fixed_point_residual(&state, &scheme) < 1e-15);
        state.x = vec![vec![1.0], vec![0.0]];
        assert!((fixed_point_residual(&state, &scheme) - 2f64.sqrt()).abs() < 1e-15);
        assert!((consensus_spread(&state.x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dr_solves_quadratic_pair() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        let out = solve(&problem, &scheme, &ParamSchedule::default(), &mut ZeroPolicy, &StopRule::default())
            .unwrap();
        assert!(out.converged);
        assert!(out.x[0].abs() < 1e-8);
        let tight = StopRule { tol: 1e-14, ..Default::default() };
        let out = solve(&problem, &scheme, &ParamSchedule::default(), &mut ZeroPolicy, &tight).unwrap();
        assert!(fixed_point_residual(&out.state, &scheme) <= 1e-12);
    }

    #[test]
    fn davis_yin_zero_of_identity() {
        let b = CocoerciveOp::new("id", 1.0, |x| x.to_vec()).unwrap();
        let problem = Problem::new(2, vec![MonotoneOp::zero(), MonotoneOp::zero()], vec![b]).unwrap();
        let scheme = BuiltinScheme::DavisYin { gamma: 1.0 }.build(1.0, &[1.0]).unwrap();
        // start away from the solution
        let state = SolverState::with_initial_z(&scheme, vec![vec![3.0, -2.0]]);
        let out = solve_from(state, &problem, &scheme, &ParamSchedule::default(), &mut ZeroPolicy, &StopRule::default())
            .unwrap();
        assert!(out.converged);
        assert!(norm(&out.x) < 1e-8);
        assert!(out.trajectory.records.iter().all(|r| r.resolvent_calls == 2 && r.forward_calls == 1));
    }

    #[test]
    fn max_iter_is_not_an_error() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        let stop = StopRule { max_iter: 1, ..Default::default() };
        let out = solve(&problem, &scheme, &ParamSchedule::default(), &mut ZeroPolicy, &stop).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn schedule_bounds_enforced() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        let bad = ParamSchedule::constant(1.0, 0.5);
        assert!(matches!(
            solve(&problem, &scheme, &bad, &mut ZeroPolicy, &StopRule::default()),
            Err(SolverError::Schedule(_))
        ));
        let bad = ParamSchedule::constant(0.5, 1.0);
        assert!(matches!(
            solve(&problem, &scheme, &bad, &mut ZeroPolicy, &StopRule::default()),
            Err(SolverError::Schedule(_))
        ));
    }

    struct Greedy;
    impl DeviationPolicy for Greedy {
        fn propose(&mut self, w: &DeviationWindow<'_>) -> crate::deviations::Deviation {
            let dim = w.z_next[0].len();
            crate::deviations::Deviation {
                u: vec![],
                v: vec![vec![1e3; dim]; w.z_next.len()],
            }
        }
        fn name(&self) -> String {
            "greedy".into()
        }
    }

    #[test]
    fn budget_violation_is_fatal() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        assert!(matches!(
            solve(&problem, &scheme, &ParamSchedule::default(), &mut Greedy, &StopRule::default()),
            Err(SolverError::BudgetViolation { k: 0, .. })
        ));
    }

    #[test]
    fn divergence_detected() {
        let blowup = MonotoneOp::new("bad", |_, y| y.iter().map(|v| v * 1e7 + 1.0).collect());
        let problem = Problem::new(1, vec![blowup.clone(), blowup], vec![]).unwrap();
        let scheme = BuiltinScheme::DouglasRachford { gamma: 1.0 }.build(1.0, &[]).unwrap();
        assert!(matches!(
            solve(&problem, &scheme, &ParamSchedule::default(), &mut ZeroPolicy, &StopRule::default()),
            Err(SolverError::Divergence { .. })
        ));
    }

    #[test]
    fn mismatch_detected() {
        let problem = quadratic_pair();
        let scheme = BuiltinScheme::DavisYin { gamma: 1.0 }.build(1.0, &[1.0]).unwrap();
        assert!(matches!(
            solve(&problem, &scheme, &ParamSchedule::default(), &mut ZeroPolicy, &StopRule::default()),
            Err(SolverError::Mismatch(_))
        ));
    }

    #[test]
    fn reference_step_examples() {
        let f1 = shifted_identity(1.0);
        let f2 = shifted_identity(-1.0);
        let (x1, _, _) = dr_reference_step(&[1.0], 1.0, 1.0, &f1, &f2);
        assert_eq!(x1, vec![1.0]);
        // identical resolvents on a point where x1 = x2 leave z unchanged
        let (x1, x2, z) = dr_reference_step(&[0.5], 1.0, 1.0, &MonotoneOp::zero(), &MonotoneOp::zero());
        assert_eq!(x1, x2);
        assert_eq!(z, vec![0.5]);
    }
}
