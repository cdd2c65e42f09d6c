//! Operator abstractions for the inclusion `0 ∈ (F_1 + ... + F_n + B_1 + ... + B_m)(x)`.
//!
//! Set-valued maximally monotone operators are accessed only through their
//! resolvents `J_{dF} = (Id + dF)^{-1}`, supplied as closures. Cocoercive
//! operators are accessed through direct evaluation and carry the constant
//! `L` for which they are `1/L`-cocoercive.

mod prox;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use prox::{project_simplex, prox_shifted_l1, prox_shifted_power32, soft_threshold};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("stepsize must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("degenerate operator: {0}")]
    Degenerate(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

type ResolventFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
type ForwardFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A maximally monotone operator, represented by its resolvent `(d, y) -> J_{dF}(y)`.
#[derive(Clone)]
pub struct MonotoneOp {
    label: String,
    resolvent: Arc<ResolventFn>,
}

impl MonotoneOp {
    pub fn new(
        label: impl Into<String>,
        resolvent: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        MonotoneOp {
            label: label.into(),
            resolvent: Arc::new(resolvent),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates `J_{step F}(y)`.
    pub fn resolvent(&self, step: f64, y: &[f64]) -> Vec<f64> {
        (self.resolvent)(step, y)
    }

    /// The zero operator; its resolvent is the identity.
    pub fn zero() -> Self {
        MonotoneOp::new("zero", |_, y| y.to_vec())
    }

    /// Subdifferential of `sum_i |x_i - c_i|`.
    pub fn shifted_l1(shift: Vec<f64>) -> Self {
        MonotoneOp::new("shifted_l1", move |d, y| {
            prox::shifted_l1_unchecked(d, &shift, y)
        })
    }

    /// Subdifferential of `sum_i |x_i - c_i|^{3/2}`.
    pub fn shifted_power32(shift: Vec<f64>) -> Self {
        MonotoneOp::new("shifted_power32", move |d, y| {
            prox::shifted_power32_unchecked(d, &shift, y)
        })
    }

    /// Normal cone of the standard simplex; the resolvent ignores the stepsize.
    pub fn simplex() -> Self {
        MonotoneOp::new("simplex", |_, y| prox::simplex_unchecked(y))
    }

    /// Gradient of `x ↦ ½ xᵀAx − bᵀx` for symmetric PSD `A`, used as a
    /// resolvent-accessed operator: `J_{dF}(y) = (I + dA)^{-1}(y + d b)`.
    pub fn quadratic(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self, OperatorError> {
        let p = b.len();
        if a.nrows() != p || a.ncols() != p {
            return Err(OperatorError::Shape {
                expected: p,
                found: a.nrows(),
            });
        }
        Ok(MonotoneOp::new("quadratic", move |d, y| {
            let sys = DMatrix::identity(p, p) + &a * d;
            let rhs = DVector::from_iterator(p, y.iter().zip(&b).map(|(yi, bi)| yi + d * bi));
            match sys.cholesky() {
                Some(ch) => ch.solve(&rhs).as_slice().to_vec(),
                None => vec![f64::NAN; p],
            }
        }))
    }
}

impl fmt::Debug for MonotoneOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneOp")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// A single-valued `1/L`-cocoercive operator.
#[derive(Clone)]
pub struct CocoerciveOp {
    label: String,
    eval: Arc<ForwardFn>,
    lipschitz: f64,
}

impl CocoerciveOp {
    pub fn new(
        label: impl Into<String>,
        lipschitz: f64,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self, OperatorError> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(OperatorError::Degenerate(format!(
                "cocoercivity constant must be positive and finite, got {lipschitz}"
            )));
        }
        Ok(CocoerciveOp {
            label: label.into(),
            eval: Arc::new(eval),
            lipschitz,
        })
    }

    /// `x ↦ Ax − b` with `L = λ_max(A)`.
    pub fn affine(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self, OperatorError> {
        let lipschitz = estimate_cocoercivity(&a)?;
        Self::affine_with_constant(a, b, lipschitz)
    }

    pub fn affine_with_constant(
        a: DMatrix<f64>,
        b: Vec<f64>,
        lipschitz: f64,
    ) -> Result<Self, OperatorError> {
        if a.nrows() != b.len() || a.ncols() != b.len() {
            return Err(OperatorError::Shape {
                expected: b.len(),
                found: a.nrows(),
            });
        }
        CocoerciveOp::new("affine", lipschitz, move |x| {
            affine_gradient_unchecked(&a, &b, x)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl fmt::Debug for CocoerciveOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CocoerciveOp")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

/// An instance of the inclusion over `R^dim`.
#[derive(Clone, Debug)]
pub struct Problem {
    dim: usize,
    resolvents: Vec<MonotoneOp>,
    forwards: Vec<CocoerciveOp>,
}

impl Problem {
    pub fn new(
        dim: usize,
        resolvents: Vec<MonotoneOp>,
        forwards: Vec<CocoerciveOp>,
    ) -> Result<Self, OperatorError> {
        if dim == 0 {
            return Err(OperatorError::InvalidProblem("dimension must be at least 1".into()));
        }
        if resolvents.len() < 2 {
            return Err(OperatorError::InvalidProblem(format!(
                "need at least two resolvent operators, got {}",
                resolvents.len()
            )));
        }
        Ok(Problem {
            dim,
            resolvents,
            forwards,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of resolvent-accessed operators `n`.
    pub fn n(&self) -> usize {
        self.resolvents.len()
    }

    /// Number of forward-evaluated operators `m`.
    pub fn m(&self) -> usize {
        self.forwards.len()
    }

    pub fn resolvents(&self) -> &[MonotoneOp] {
        &self.resolvents
    }

    pub fn forwards(&self) -> &[CocoerciveOp] {
        &self.forwards
    }

    pub fn lipschitz(&self) -> Vec<f64> {
        self.forwards.iter().map(|b| b.lipschitz).collect()
    }
}

fn affine_gradient_unchecked(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = DVector::from_column_slice(b);
    out.gemv(1.0, a, &DVector::from_column_slice(x), -1.0);
    out.data.into()
}

/// Evaluates `Ax − b`.
pub fn affine_gradient(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> Result<Vec<f64>, OperatorError> {
    let p = x.len();
    for found in [a.nrows(), a.ncols(), b.len()] {
        if found != p {
            return Err(OperatorError::Shape { expected: p, found });
        }
    }
    Ok(affine_gradient_unchecked(a, b, x))
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// The start vector is a fixed low-discrepancy sequence, so the result is
/// deterministic. Iteration stops once the estimate `‖Av‖` (with `‖v‖ = 1`)
/// stalls to relative `1e-15`, or after `10^4` sweeps.
pub fn estimate_cocoercivity(a: &DMatrix<f64>) -> Result<f64, OperatorError> {
    let p = a.nrows();
    if a.ncols() != p {
        return Err(OperatorError::Shape {
            expected: p,
            found: a.ncols(),
        });
    }
    if p == 0 || a.iter().all(|v| v.abs() <= f64::MIN_POSITIVE) {
        return Err(OperatorError::Degenerate("zero matrix has no positive eigenvalue".into()));
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(OperatorError::NonFinite);
    }

    const PLASTIC: f64 = 0.754_877_666_246_692_7;
    let mut v = DVector::from_iterator(p, (0..p).map(|i| 0.5 + ((i + 1) as f64 * PLASTIC).fract()));
    if (a * &v).norm() == 0.0 {
        // start vector fell in the kernel; restart from the heaviest column
        let col = (0..p)
            .max_by(|&i, &j| a.column(i).norm().total_cmp(&a.column(j).norm()))
            .unwrap_or(0);
        v = a.column(col).into_owned();
    }
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = a * &v;
        let next = w.norm();
        if next == 0.0 {
            break;
        }
        v = &w / next;
        let stalled = (next - estimate).abs() <= 1e-15 * next;
        estimate = next;
        if stalled {
            break;
        }
    }
    if estimate > 0.0 {
        Ok(estimate)
    } else {
        Err(OperatorError::Degenerate("power iteration collapsed to zero".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_gradient_examples() {
        let id = DMatrix::identity(2, 2);
        assert_eq!(affine_gradient(&id, &[0.0, 0.0], &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(
            affine_gradient(&zero, &[1.0, 1.0], &[7.0, -3.0]).unwrap(),
            vec![-1.0, -1.0]
        );
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        assert_eq!(affine_gradient(&a, &[1.0, 0.0], &[1.0, 1.0]).unwrap(), vec![1.0, 4.0]);
        assert!(matches!(
            affine_gradient(&a, &[1.0], &[1.0, 1.0]),
            Err(OperatorError::Shape { .. })
        ));
    }

    #[test]
    fn cocoercivity_examples() {
        let l = estimate_cocoercivity(&DMatrix::identity(3, 3)).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let l = estimate_cocoercivity(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0])))
            .unwrap();
        assert!((l - 5.0).abs() < 5e-8);
        // characteristic polynomial (2 - t)^2 - 1 has roots 1 and 3
        let l = estimate_cocoercivity(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]))
            .unwrap();
        assert!((l - 3.0).abs() < 3e-8);
        assert!(matches!(
            estimate_cocoercivity(&DMatrix::zeros(3, 3)),
            Err(OperatorError::Degenerate(_))
        ));
    }

    #[test]
    fn cocoercivity_kernel_start() {
        // ones vector lies in the kernel of this matrix
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let l = estimate_cocoercivity(&a).unwrap();
        assert!((l - 2.0).abs() < 2e-8);
    }

    #[test]
    fn quadratic_resolvent_solves_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let op = MonotoneOp::quadratic(a.clone(), vec![1.0, -1.0]).unwrap();
        let y = [0.3, 0.7];
        let x = op.resolvent(0.5, &y);
        // x + d(Ax - b) = y
        let ax = affine_gradient(&a, &[1.0, -1.0], &x).unwrap();
        for i in 0..2 {
            assert!((x[i] + 0.5 * ax[i] - y[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn problem_requires_two_resolvents() {
        assert!(Problem::new(1, vec![MonotoneOp::zero()], vec![]).is_err());
        assert!(Problem::new(0, vec![MonotoneOp::zero(), MonotoneOp::zero()], vec![]).is_err());
        let p = Problem::new(3, vec![MonotoneOp::zero(), MonotoneOp::simplex()], vec![]).unwrap();
        assert_eq!((p.n(), p.m(), p.dim()), (2, 0, 3));
    }

    #[test]
    fn cocoercive_rejects_bad_constant() {
        assert!(CocoerciveOp::new("b", 0.0, |x| x.to_vec()).is_err());
        assert!(CocoerciveOp::new("b", f64::NAN, |x| x.to_vec()).is_err());
    }
}
