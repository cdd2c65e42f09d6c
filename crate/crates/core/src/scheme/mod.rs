//! Matrix schemes `(M, S, C, Q, θ)` and their validation.
//!
//! A scheme fixes how the `n` resolvents and `m` forward evaluations are
//! chained inside one iteration. The matrices must satisfy:
//!
//! * `ker Mᵀ ⊆ ℝe_n`;
//! * `(C, Qᵀ)` is a causal pair and `Cᵀe_n = Qe_n = e_m`;
//! * `S` is symmetric, `e_nᵀSe_n = 0`, and
//!   `S − MMᵀ − ½(1+1/θ)(Cᵀ−Q)ᵀL^{-1}(Cᵀ−Q) ⪰ 0`.
//!
//! [`Scheme`] values only exist once every check has passed; the derived
//! stepsizes `d_i = 2/S_ii`, the strictly lower part `N = −slt(S)` and a
//! staircase vector are cached alongside.

mod builtin;
mod checks;
mod spec;

use nalgebra::DMatrix;
use thiserror::Error;

pub use builtin::BuiltinScheme;
pub use checks::{
    build_default_s, check_kernel_condition, check_psd_condition, check_row_sums,
    compute_stepsizes, find_staircase_vector, validate, CheckResult, PsdOutcome,
    StaircaseVector, ValidationReport, Witness,
};
pub use spec::{ExplicitScheme, SchemeSpec};

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{matrix}[{row},{col}] is nonzero but no staircase vector allows it")]
    CausalityViolation {
        matrix: String,
        row: usize,
        col: usize,
    },
    #[error("degenerate stepsize: S[{index},{index}] = {value}")]
    DegenerateStepsize { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scheme failed validation: {}", .0.failed_checks().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", "))]
    Invalid(ValidationReport),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A validated matrix scheme, bound to the cocoercivity constants it was checked against.
#[derive(Clone, Debug)]
pub struct Scheme {
    m: DMatrix<f64>,
    s: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    theta: f64,
    lipschitz: Vec<f64>,
    stepsizes: Vec<f64>,
    lower: DMatrix<f64>,
    staircase: StaircaseVector,
    report: ValidationReport,
}

impl Scheme {
    /// Validates the tuple and derives `d`, `N` and a staircase vector.
    pub fn new(
        m: DMatrix<f64>,
        s: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        theta: f64,
        lipschitz: Vec<f64>,
    ) -> Result<Self, SchemeError> {
        if s.nrows() == 1 {
            return Err(SchemeError::Unsupported(
                "n = 1 leaves no lifted variable; at least two resolvents are required".into(),
            ));
        }
        let report = validate(&m, &s, &c, &q, &lipschitz, theta);
        if !report.passed() {
            return Err(SchemeError::Invalid(report));
        }
        let stepsizes = compute_stepsizes(&s)?;
        let staircase = find_staircase_vector(&c, &q)?;
        let n = s.nrows();
        let lower = DMatrix::from_fn(n, n, |i, j| if j < i { -s[(i, j)] } else { 0.0 });
        Ok(Scheme {
            m,
            s,
            c,
            q,
            theta,
            lipschitz,
            stepsizes,
            lower,
            staircase,
            report,
        })
    }

    /// Like [`Scheme::new`] with `S` from [`build_default_s`].
    pub fn with_default_s(
        m: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        theta: f64,
        lipschitz: Vec<f64>,
    ) -> Result<Self, SchemeError> {
        let s = build_default_s(&m, &c, &q, &lipschitz, theta)?;
        Scheme::new(m, s, c, q, theta, lipschitz)
    }

    pub fn builtin(
        kind: &BuiltinScheme,
        theta: f64,
        lipschitz: &[f64],
    ) -> Result<Self, SchemeError> {
        kind.build(theta, lipschitz)
    }

    /// Number of resolvent blocks `n`.
    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    /// Number of forward operators `m`.
    pub fn num_forward(&self) -> usize {
        self.c.ncols()
    }

    pub fn m_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn s_matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn c_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `N = −slt(S)`.
    pub fn n_matrix(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn stepsizes(&self) -> &[f64] {
        &self.stepsizes
    }

    pub fn staircase(&self) -> &StaircaseVector {
        &self.staircase
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn to_explicit(&self) -> ExplicitScheme {
        ExplicitScheme::from_scheme(self)
    }
}
