//! Closed-form resolvents for the separable functions used by the portfolio model.

use super::OperatorError;

fn check_inputs(lambda: f64, shift: &[f64], s: &[f64]) -> Result<(), OperatorError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(OperatorError::InvalidStep(lambda));
    }
    if shift.len() != s.len() {
        return Err(OperatorError::Shape {
            expected: shift.len(),
            found: s.len(),
        });
    }
    if !shift.iter().chain(s).all(|v| v.is_finite()) {
        return Err(OperatorError::NonFinite);
    }
    Ok(())
}

/// Scalar soft-threshold `sign(t) * max(|t| - lambda, 0)`.
pub fn soft_threshold(t: f64, lambda: f64) -> f64 {
    if t > lambda {
        t - lambda
    } else if t < -lambda {
        t + lambda
    } else {
        0.0
    }
}

pub(crate) fn shifted_l1_unchecked(lambda: f64, shift: &[f64], s: &[f64]) -> Vec<f64> {
    shift
        .iter()
        .zip(s)
        .map(|(&c, &si)| c + soft_threshold(si - c, lambda))
        .collect()
}

/// Proximal map of `lambda * sum_i |t_i - c_i|` evaluated at `s`.
pub fn prox_shifted_l1(lambda: f64, shift: &[f64], s: &[f64]) -> Result<Vec<f64>, OperatorError> {
    check_inputs(lambda, shift, s)?;
    Ok(shifted_l1_unchecked(lambda, shift, s))
}

/// Magnitude `w >= 0` solving `w + (3 lambda / 2) sqrt(w) = a` for `a >= 0`.
///
/// With `q = sqrt(w)` this is `q^2 + (3 lambda / 2) q - a = 0`; the positive
/// root is written in the cancellation-free form `2a / (b + sqrt(b^2 + 4a))`.
pub(crate) fn power32_magnitude(a: f64, lambda: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let b = 1.5 * lambda;
    let q = 2.0 * a / (b + (b * b + 4.0 * a).sqrt());
    q * q
}

pub(crate) fn shifted_power32_unchecked(lambda: f64, shift: &[f64], s: &[f64]) -> Vec<f64> {
    shift
        .iter()
        .zip(s)
        .map(|(&c, &si)| {
            let r = si - c;
            c + r.signum() * power32_magnitude(r.abs(), lambda)
        })
        .collect()
}

/// Proximal map of `lambda * sum_i |t_i - c_i|^{3/2}` evaluated at `s`.
pub fn prox_shifted_power32(
    lambda: f64,
    shift: &[f64],
    s: &[f64],
) -> Result<Vec<f64>, OperatorError> {
    check_inputs(lambda, shift, s)?;
    Ok(shifted_power32_unchecked(lambda, shift, s))
}

pub(crate) fn simplex_unchecked(s: &[f64]) -> Vec<f64> {
    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    s.iter().map(|&si| (si - tau).max(0.0)).collect()
}

/// Euclidean projection onto the standard simplex `{x >= 0, sum x = 1}`.
///
/// Sort-and-threshold: the projection is `max(s - tau, 0)` where `tau` is the
/// largest threshold keeping the active coordinates summing to one.
pub fn project_simplex(s: &[f64]) -> Result<Vec<f64>, OperatorError> {
    if s.is_empty() {
        return Err(OperatorError::Shape {
            expected: 1,
            found: 0,
        });
    }
    if !s.iter().all(|v| v.is_finite()) {
        return Err(OperatorError::NonFinite);
    }
    Ok(simplex_unchecked(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimizer of `½(t − s)² + λ|t − c|^p` by bisection on the
    /// (monotone) subgradient; a sign change brackets the kink as well.
    fn oracle(lambda: f64, c: f64, s: f64, pow: f64) -> f64 {
        let g = |t: f64| {
            let r = t - c;
            let slope = if r == 0.0 { 0.0 } else { r.signum() * pow * r.abs().powf(pow - 1.0) };
            (t - s) + lambda * slope
        };
        let span = 10.0 * lambda + 10.0;
        let (mut lo, mut hi) = (s - span, s + span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn l1_examples() {
        assert_eq!(prox_shifted_l1(1.0, &[0.0], &[3.0]).unwrap(), vec![2.0]);
        assert_eq!(prox_shifted_l1(1.0, &[0.0], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(prox_shifted_l1(0.5, &[2.0], &[2.1]).unwrap(), vec![2.0]);
        // frozen from the bisection oracle
        assert!((oracle(1.0, 0.0, 3.0, 1.0) - 2.0).abs() < 1e-8);
        assert!((oracle(0.5, 2.0, 2.1, 1.0) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn power32_examples() {
        let out = prox_shifted_power32(2.0 / 3.0, &[0.0], &[2.0]).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert_eq!(prox_shifted_power32(5.0, &[0.0], &[0.0]).unwrap(), vec![0.0]);
        let out = prox_shifted_power32(2.0 / 3.0, &[1.0], &[-1.0]).unwrap();
        assert!(out[0].abs() < 1e-15);
        assert!((oracle(2.0 / 3.0, 0.0, 2.0, 1.5) - 1.0).abs() < 1e-8);
        assert!(oracle(2.0 / 3.0, 1.0, -1.0, 1.5).abs() < 1e-8);
    }

    #[test]
    fn simplex_examples() {
        let x = project_simplex(&[0.5, 0.5, 0.5]).unwrap();
        for v in &x {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(project_simplex(&[2.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let x = project_simplex(&[0.4, 0.4, 0.2]).unwrap();
        for (a, b) in x.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            prox_shifted_l1(1.0, &[0.0], &[f64::NAN]),
            Err(OperatorError::NonFinite)
        ));
        assert!(matches!(
            prox_shifted_power32(0.0, &[0.0], &[1.0]),
            Err(OperatorError::InvalidStep(_))
        ));
        assert!(matches!(
            prox_shifted_l1(1.0, &[0.0, 1.0], &[1.0]),
            Err(OperatorError::Shape { .. })
        ));
        assert!(matches!(
            project_simplex(&[1.0, f64::INFINITY]),
            Err(OperatorError::NonFinite)
        ));
        assert!(project_simplex(&[]).is_err());
    }
}
