#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use splitdev::deviations::{deviation_cost, Deviation, DeviationPolicy};
use splitdev::operators::{CocoerciveOp, MonotoneOp, Problem};
use splitdev::scheme::{BuiltinScheme, Scheme};
use splitdev::solver::{step, IterationRecord, ParamSchedule, Rate, SolverError, SolverState};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Vec<f64> {
    (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `GGᵀ/p + shift·I`.
pub fn random_psd(rng: &mut ChaCha8Rng, p: usize, shift: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, p, p);
    &g * g.transpose() / p as f64 + DMatrix::identity(p, p) * shift
}

pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.max()
}

/// A random smooth instance together with a matching validated scheme.
pub struct Instance {
    pub problem: Problem,
    pub scheme: Scheme,
    pub schedule: ParamSchedule,
    /// Unique zero of the sum, computed by a dense linear solve.
    pub solution: Vec<f64>,
    pub description: String,
}

/// Mixed quadratic `F_i = A_i x − b_i` and affine `B_j = G_j x − c_j`, `p <= 10`.
pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let p = r.random_range(1..=10);
    let variant = r.random_range(0..4);
    let (n, m) = match variant {
        0 => (2, 0),
        1 => (2, 1),
        _ => {
            let n = r.random_range(3..=5);
            (n, r.random_range(0..n))
        }
    };

    let mut total = DMatrix::zeros(p, p);
    let mut rhs = nalgebra::DVector::zeros(p);
    let mut resolvents = Vec::new();
    for i in 0..n {
        let a = random_psd(&mut r, p, if i == 0 { 0.2 } else { 0.0 });
        let b = gaussian_vec(&mut r, p, 1.0);
        total += &a;
        rhs += nalgebra::DVector::from_column_slice(&b);
        resolvents.push(MonotoneOp::quadratic(a, b).expect("psd quadratic"));
    }
    let mut forwards = Vec::new();
    let mut lipschitz = Vec::new();
    for _ in 0..m {
        let g = random_psd(&mut r, p, 0.0) * r.random_range(0.2..2.0);
        let c = gaussian_vec(&mut r, p, 1.0);
        let l = lambda_max(&g).max(1e-9);
        total += &g;
        rhs += nalgebra::DVector::from_column_slice(&c);
        lipschitz.push(l);
        forwards.push(CocoerciveOp::affine_with_constant(g, c, l).expect("affine"));
    }
    let solution: Vec<f64> = total.lu().solve(&rhs).expect("strongly monotone sum").iter().copied().collect();

    let theta = r.random_range(0.5..2.0);
    let kind = match variant {
        0 => BuiltinScheme::DouglasRachford { gamma: r.random_range(0.3..2.0) },
        1 => {
            // davis_yin needs γ < 4θ/((1+θ)L); a tiny L would otherwise allow huge γ
            let cap = (4.0 * theta / ((1.0 + theta) * lipschitz[0])).min(4.0);
            BuiltinScheme::DavisYin { gamma: r.random_range(0.3..0.95) * cap }
        }
        _ => BuiltinScheme::ChainFb { n, m, gamma: r.random_range(0.5..2.0) },
    };
    let scheme = kind.build(theta, &lipschitz).expect("builtin scheme");
    let gamma_base: f64 = r.random_range(0.3..0.9);
    let xi_base: f64 = r.random_range(0.0..0.95);
    let schedule = if r.random_bool(0.5) {
        ParamSchedule::constant(gamma_base, xi_base)
    } else {
        ParamSchedule {
            gamma: Rate::Sequence(Arc::new(move |k| gamma_base + 0.05 * ((k % 7) as f64 / 7.0))),
            xi: Rate::Sequence(Arc::new(move |k| xi_base * (1.0 - 1.0 / (k as f64 + 2.0)))),
            epsilon: 1e-3,
        }
    };
    Instance {
        problem: Problem::new(p, resolvents, forwards).expect("problem"),
        scheme,
        schedule,
        solution,
        description: format!("seed {seed}: p={p}, {}", kind.name()),
    }
}

/// Per-iteration quantities needed by the Fejér checks.
pub struct Tracked {
    pub records: Vec<IterationRecord>,
    /// `z^k` for `k = 0..=K`.
    pub z: Vec<Vec<Vec<f64>>>,
    /// Cost of `(u^k, v^k)` weighted with `γ_k`, for `k = 0..K`.
    pub deviation_cost: Vec<f64>,
    pub state: SolverState,
    pub converged: bool,
    /// Index into `records` of the iteration that met `tol`.
    pub stop: Option<usize>,
}

/// Steps until the residual drops below `tol` (or `max_iter`), keeping every `z^k`.
pub fn run_tracked(
    inst: &Instance,
    policy: &mut dyn DeviationPolicy,
    tol: f64,
    max_iter: usize,
) -> Result<Tracked, SolverError> {
    run_tracked_past(inst, policy, tol, max_iter, 0)
}

/// Like [`run_tracked`], then `extra` further steps after the stopping iteration.
pub fn run_tracked_past(
    inst: &Instance,
    policy: &mut dyn DeviationPolicy,
    tol: f64,
    max_iter: usize,
    extra: usize,
) -> Result<Tracked, SolverError> {
    let mut state = SolverState::new(&inst.scheme, inst.problem.dim());
    let mut out = Tracked {
        records: Vec::new(),
        z: vec![state.z.clone()],
        deviation_cost: Vec::new(),
        state: state.clone(),
        converged: false,
        stop: None,
    };
    let mut remaining = extra;
    while state.k < max_iter {
        let gamma = inst.schedule.gamma_at(state.k)?;
        let dev = Deviation { u: state.u.clone(), v: state.v.clone() };
        out.deviation_cost
            .push(deviation_cost(&dev, gamma, inst.scheme.theta(), inst.scheme.lipschitz()));
        let rec = step(&mut state, &inst.problem, &inst.scheme, &inst.schedule, policy)?;
        out.z.push(state.z.clone());
        let done = rec.residual <= tol;
        out.records.push(rec);
        if out.stop.is_none() && done {
            out.converged = true;
            out.stop = Some(out.records.len() - 1);
            if remaining == 0 {
                break;
            }
        } else if out.stop.is_some() {
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    out.state = state;
    Ok(out)
}

pub fn dist_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Largest violation of both Fejér inequalities along a tracked run, relative to `z_star`:
/// `‖z^{k+1}−z*‖² + l_k² <= ‖z^k−z*‖² + cost(u^k, v^k)` and
/// `‖z^{k+1}−z*‖² + l_k² <= ‖z^k−z*‖² + ξ_{k−1} l_{k−1}²`.
pub fn fejer_excess(t: &Tracked, z_star: &[Vec<f64>]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (k, rec) in t.records.iter().enumerate() {
        let lhs = dist_sq(&t.z[k + 1], z_star) + rec.l2;
        let base = dist_sq(&t.z[k], z_star);
        worst = worst.max(lhs - base - t.deviation_cost[k]);
        let carry = if k == 0 { 0.0 } else { t.records[k - 1].budget };
        worst = worst.max(lhs - base - carry);
    }
    worst
}

/// Textbook Douglas–Rachford on `F_1 = ∂½‖x − a‖²`, `F_2 = ∂½‖x − b‖²`.
pub fn quadratic_pair(a: f64, b: f64, dim: usize) -> (Problem, MonotoneOp, MonotoneOp) {
    let shifted = |c: f64| {
        MonotoneOp::new("shifted_quadratic", move |d, y| y.iter().map(|v| (v + d * c) / (1.0 + d)).collect())
    };
    let (f1, f2) = (shifted(a), shifted(b));
    (Problem::new(dim, vec![f1.clone(), f2.clone()], vec![]).unwrap(), f1, f2)
}
