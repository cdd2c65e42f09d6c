//! Independent reference solver: proximal gradient on the smooth part
//! `f_1 + f_2`, with the prox of `g_1 + g_2 + I_Δ` computed exactly by
//! bisection on the simplex multiplier. Shares no code with the splitting
//! solver or its prox operators.

use super::{MarkowitzError, MarkowitzProblem};

const MAX_ITER: usize = 1_000_000;
const STOP: f64 = 1e-15;

/// `argmin_t ½(t − s)² + α|t| + α|t|^{3/2}` over `t ∈ R`.
fn scalar_prox(s: f64, alpha: f64) -> f64 {
    let a = s.abs();
    if a <= alpha {
        return 0.0;
    }
    // magnitude w solves w + α + (3α/2)√w = a; q = √w is the positive root
    // of q² + (3α/2)q − (a − α) = 0
    let b = 1.5 * alpha;
    let c = a - alpha;
    let q = 2.0 * c / (b + (b * b + 4.0 * c).sqrt());
    s.signum() * q * q
}

/// `argmin_{x∈Δ} ½‖x − y‖² + α Σ(|x_i − c_i| + |x_i − c_i|^{3/2})`.
fn constrained_prox(y: &[f64], c: &[f64], alpha: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> {
        y.iter()
            .zip(c)
            .map(|(yi, ci)| (ci + scalar_prox(yi - mu - ci, alpha)).max(0.0))
            .collect()
    };
    let mass = |mu: f64| at(mu).iter().sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mass(lo) < 1.0 {
        lo = 2.0 * lo - 1.0;
    }
    while mass(hi) > 1.0 {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Solves the portfolio problem to near machine precision.
pub fn oracle_solution(mp: &MarkowitzProblem) -> Result<Vec<f64>, MarkowitzError> {
    let p = mp.assets();
    let step = 1.0 / (mp.lipschitz_quadratic() + mp.delta);
    let mut x = vec![1.0 / p as f64; p];
    for _ in 0..MAX_ITER {
        let y: Vec<f64> = (0..p)
            .map(|i| {
                let lx: f64 = (0..p).map(|j| mp.lambda[(i, j)] * x[j]).sum();
                x[i] - step * (lx - mp.r[i] + mp.delta * x[i])
            })
            .collect();
        let next = constrained_prox(&y, &mp.x0, step);
        let change = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = next;
        if change <= STOP {
            return Ok(x);
        }
    }
    Err(MarkowitzError::OracleFailure(format!(
        "proximal gradient did not settle within {MAX_ITER} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn scalar_prox_optimality() {
        for (s, alpha) in [(3.0, 1.0), (-2.5, 0.3), (0.2, 0.5), (10.0, 4.0)] {
            let t = scalar_prox(s, alpha);
            if t != 0.0 {
                let g = t - s + alpha * t.signum() * (1.0 + 1.5 * t.abs().sqrt());
                assert!(g.abs() < 1e-12, "s = {s}");
            } else {
                assert!(s.abs() <= alpha);
            }
        }
    }

    #[test]
    fn small_problem_matches_kkt() {
        // Λ = 0, r = 0, δ = 1, x0 = (1, 0): objective δ/2‖x‖² + deviations.
        let mp = MarkowitzProblem::new(DMatrix::zeros(2, 2), vec![0.0; 2], 1.0, vec![1.0, 0.0]).unwrap();
        let x = oracle_solution(&mp).unwrap();
        assert!((x[0] + x[1] - 1.0).abs() < 1e-14);
        // brute force on a fine grid of the segment
        let best = (0..=100_000)
            .map(|k| k as f64 / 100_000.0)
            .min_by(|a, b| mp.objective(&[*a, 1.0 - a]).total_cmp(&mp.objective(&[*b, 1.0 - b])))
            .unwrap();
        assert!((x[0] - best).abs() < 1e-4);
    }

    #[test]
    fn stays_at_x0_when_deviation_cost_dominates() {
        let x0 = vec![0.3, 0.3, 0.4];
        let mp = MarkowitzProblem::new(DMatrix::zeros(3, 3), vec![0.0; 3], 0.1, x0.clone()).unwrap();
        let x = oracle_solution(&mp).unwrap();
        for (a, b) in x.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
