//! Deviation policies.
//!
//! After each iteration the solver asks a policy for the next deviation pair
//! `(u, v)`: `u` shifts the forward-operator inputs, `v` shifts the lifted
//! variable seen by the resolvents. Any pair is admissible as long as
//!
//! ```text
//! γ/(1−γ)·‖v‖² + γ(1+θ)/2·‖u‖²_{L^{-1}} <= ξ·l²
//! ```
//!
//! where `γ` is the next relaxation parameter and `ξ·l²` is the budget
//! released by the step just taken. [`enforce_budget`] rescales raw proposals
//! into this set; the solver checks the inequality again and aborts on violation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::vecops::{blocks_norm_sq, blocks_scale, blocks_sub, norm_sq, zeros};

/// What a policy may look at: the last two lifted iterates and forward inputs.
#[derive(Clone, Copy, Debug)]
pub struct DeviationWindow<'a> {
    /// Index of the iteration that just finished.
    pub k: usize,
    /// `z^k`.
    pub z_prev: &'a [Vec<f64>],
    /// `z^{k+1}`.
    pub z_next: &'a [Vec<f64>],
    /// Forward-operator inputs `Qx^k + u^k`, one block per forward operator.
    pub forward_inputs: &'a [Vec<f64>],
    /// The same for iteration `k − 1`, when it exists.
    pub prev_forward_inputs: Option<&'a [Vec<f64>]>,
    /// Right-hand side `ξ_k l_k²`.
    pub budget: f64,
    /// `γ_{k+1}`.
    pub gamma_next: f64,
    pub theta: f64,
    /// `L_1, …, L_m`.
    pub lipschitz: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Deviation {
    pub fn zero(num_forward: usize, lifted: usize, dim: usize) -> Self {
        Deviation {
            u: zeros(num_forward, dim),
            v: zeros(lifted, dim),
        }
    }

    fn zero_like(window: &DeviationWindow<'_>) -> Self {
        let dim = window.z_next.first().map_or(0, Vec::len);
        Deviation::zero(window.forward_inputs.len(), window.z_next.len(), dim)
    }
}

pub trait DeviationPolicy {
    fn propose(&mut self, window: &DeviationWindow<'_>) -> Deviation;

    fn name(&self) -> String;
}

/// `‖u‖²_{L^{-1}} = Σ_j L_j ‖u_j‖²`.
pub fn weighted_norm_sq(u: &[Vec<f64>], lipschitz: &[f64]) -> f64 {
    u.iter().zip(lipschitz).map(|(b, l)| l * norm_sq(b)).sum()
}

fn v_cost(v: &[Vec<f64>], gamma: f64) -> f64 {
    gamma / (1.0 - gamma) * blocks_norm_sq(v)
}

fn u_cost(u: &[Vec<f64>], gamma: f64, theta: f64, lipschitz: &[f64]) -> f64 {
    gamma * (1.0 + theta) / 2.0 * weighted_norm_sq(u, lipschitz)
}

/// Left-hand side of the deviation inequality.
pub fn deviation_cost(dev: &Deviation, gamma: f64, theta: f64, lipschitz: &[f64]) -> f64 {
    v_cost(&dev.v, gamma) + u_cost(&dev.u, gamma, theta, lipschitz)
}

/// Scales `v_raw` into a `rho` share of the budget and `u_raw` into the rest.
///
/// Each part is shrunk by `min(1, sqrt(share / cost))`, so outputs are
/// nonnegative multiples of the inputs and their total cost is at most `budget`.
pub fn enforce_budget(
    u_raw: Vec<Vec<f64>>,
    v_raw: Vec<Vec<f64>>,
    budget: f64,
    gamma_next: f64,
    theta: f64,
    lipschitz: &[f64],
    rho: f64,
) -> Deviation {
    if !(budget > 0.0) {
        return Deviation {
            u: blocks_scale(&u_raw, 0.0),
            v: blocks_scale(&v_raw, 0.0),
        };
    }
    let shrink = |cost: f64, share: f64| {
        if cost <= share {
            1.0
        } else {
            (share / cost).sqrt()
        }
    };
    let sv = shrink(v_cost(&v_raw, gamma_next), rho * budget);
    let su = shrink(u_cost(&u_raw, gamma_next, theta, lipschitz), (1.0 - rho) * budget);
    Deviation {
        u: if su == 1.0 { u_raw } else { blocks_scale(&u_raw, su) },
        v: if sv == 1.0 { v_raw } else { blocks_scale(&v_raw, sv) },
    }
}

/// Always returns zero deviations, recovering the deviation-free method.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPolicy;

impl DeviationPolicy for ZeroPolicy {
    fn propose(&mut self, window: &DeviationWindow<'_>) -> Deviation {
        Deviation::zero_like(window)
    }

    fn name(&self) -> String {
        "zero".into()
    }
}

/// Extrapolates along the last displacement.
///
/// `v_raw = β(z^{k+1} − z^k)` and `u_raw = β(w^k − w^{k−1})` where `w` are the
/// forward-operator inputs, then [`enforce_budget`] with share `rho` for `v`.
#[derive(Clone, Copy, Debug)]
pub struct MomentumPolicy {
    pub beta: f64,
    pub rho: f64,
}

impl MomentumPolicy {
    pub const DEFAULT_BETA: f64 = 1.0;
    pub const DEFAULT_RHO: f64 = 0.7;

    pub fn new(beta: f64, rho: f64) -> Result<Self, PolicyParseError> {
        for (name, v) in [("beta", beta), ("rho", rho)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PolicyParseError(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(MomentumPolicy { beta, rho })
    }
}

impl DeviationPolicy for MomentumPolicy {
    fn propose(&mut self, window: &DeviationWindow<'_>) -> Deviation {
        if self.beta == 0.0 {
            return Deviation::zero_like(window);
        }
        let v_raw = blocks_scale(&blocks_sub(window.z_next, window.z_prev), self.beta);
        let u_raw = match window.prev_forward_inputs {
            Some(prev) => blocks_scale(&blocks_sub(window.forward_inputs, prev), self.beta),
            None => blocks_scale(window.forward_inputs, 0.0),
        };
        enforce_budget(
            u_raw,
            v_raw,
            window.budget,
            window.gamma_next,
            window.theta,
            window.lipschitz,
            self.rho,
        )
    }

    fn name(&self) -> String {
        format!("momentum:beta={},rho={}", self.beta, self.rho)
    }
}

/// Random directions drawn uniformly from the unit ball, scaled into the budget
/// with an even split between `u` and `v`.
#[derive(Clone, Debug)]
pub struct RandomBallPolicy {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomBallPolicy {
    pub fn new(seed: u64) -> Self {
        RandomBallPolicy {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn draw_ball(&mut self, blocks: usize, dim: usize) -> Vec<Vec<f64>> {
        let total = blocks * dim;
        if total == 0 {
            return zeros(blocks, dim);
        }
        let mut out: Vec<Vec<f64>> = (0..blocks)
            .map(|_| (0..dim).map(|_| self.rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let norm = blocks_norm_sq(&out).sqrt();
        let radius = self.rng.random::<f64>().powf(1.0 / total as f64);
        if norm > 0.0 {
            out = blocks_scale(&out, radius / norm);
        }
        out
    }
}

impl DeviationPolicy for RandomBallPolicy {
    fn propose(&mut self, window: &DeviationWindow<'_>) -> Deviation {
        let dim = window.z_next.first().map_or(0, Vec::len);
        let u_raw = self.draw_ball(window.forward_inputs.len(), dim);
        let v_raw = self.draw_ball(window.z_next.len(), dim);
        enforce_budget(
            u_raw,
            v_raw,
            window.budget,
            window.gamma_next,
            window.theta,
            window.lipschitz,
            0.5,
        )
    }

    fn name(&self) -> String {
        format!("randball:seed={}", self.seed)
    }
}

#[derive(Debug, Error)]
#[error("invalid policy: {0}")]
pub struct PolicyParseError(pub String);

/// Parsed form of the policy config strings
/// `"zero"`, `"momentum:beta=…,rho=…"` and `"randball:seed=…"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicySpec {
    Zero,
    Momentum { beta: f64, rho: f64 },
    RandomBall { seed: u64 },
}

impl PolicySpec {
    pub fn build(&self) -> Box<dyn DeviationPolicy + Send> {
        match *self {
            PolicySpec::Zero => Box::new(ZeroPolicy),
            PolicySpec::Momentum { beta, rho } => Box::new(MomentumPolicy { beta, rho }),
            PolicySpec::RandomBall { seed } => Box::new(RandomBallPolicy::new(seed)),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = PolicyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Vec::new();
        for pair in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| PolicyParseError(format!("expected key=value, got {pair:?}")))?;
            params.push((k.trim(), v.trim()));
        }
        let float = |v: &str| {
            v.parse::<f64>()
                .map_err(|e| PolicyParseError(format!("bad number {v:?}: {e}")))
        };
        match kind {
            "zero" if params.is_empty() => Ok(PolicySpec::Zero),
            "momentum" => {
                let mut beta = MomentumPolicy::DEFAULT_BETA;
                let mut rho = MomentumPolicy::DEFAULT_RHO;
                for (k, v) in params {
                    match k {
                        "beta" => beta = float(v)?,
                        "rho" => rho = float(v)?,
                        other => return Err(PolicyParseError(format!("unknown momentum key {other:?}"))),
                    }
                }
                MomentumPolicy::new(beta, rho)?;
                Ok(PolicySpec::Momentum { beta, rho })
            }
            "randball" => {
                let mut seed = 0;
                for (k, v) in params {
                    match k {
                        "seed" => {
                            seed = v
                                .parse()
                                .map_err(|e| PolicyParseError(format!("bad seed {v:?}: {e}")))?
                        }
                        other => return Err(PolicyParseError(format!("unknown randball key {other:?}"))),
                    }
                }
                Ok(PolicySpec::RandomBall { seed })
            }
            _ => Err(PolicyParseError(format!("unrecognized policy {s:?}"))),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Zero => write!(f, "zero"),
            PolicySpec::Momentum { beta, rho } => write!(f, "momentum:beta={beta},rho={rho}"),
            PolicySpec::RandomBall { seed } => write!(f, "randball:seed={seed}"),
        }
    }
}
