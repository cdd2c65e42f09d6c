//! Mechanical checks of the matrix conditions a scheme must satisfy.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use serde::Serialize;

use super::SchemeError;

/// Evidence attached to a check, pass or fail.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum Witness {
    /// A vector in `ker Mᵀ` not parallel to `e_n`.
    KernelVector(Vec<f64>),
    /// Offending matrix entry, 0-based.
    Entry {
        matrix: String,
        row: usize,
        col: usize,
        value: f64,
    },
    /// Smallest eigenvalue of the tested matrix.
    MinEigenvalue(f64),
    /// The value of `e_nᵀ S e_n`.
    QuadraticForm(f64),
    /// A staircase vector certifying causality.
    Staircase(Vec<usize>),
    /// Line sums that were tested.
    Sums(Vec<f64>),
    /// Matrix rank.
    Rank(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: impl Into<String>, witness: Option<Witness>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail: detail.into(),
            witness,
        }
    }
}

/// The per-check outcome of validating a matrix tuple. Usable iff every check passed.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// An `(m, n)`-nondecreasing vector: `A_1 = 0`, `A_n = m`, entries nondecreasing.
///
/// Entries are stored as in the mathematical convention: `A_i` counts how many
/// forward operators may feed block `i` (1-based column indices `j <= A_i`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StaircaseVector(Vec<usize>);

impl StaircaseVector {
    pub fn new(values: Vec<usize>, m: usize) -> Result<Self, SchemeError> {
        let ok = !values.is_empty()
            && values[0] == 0
            && *values.last().unwrap() == m
            && values.windows(2).all(|w| w[0] <= w[1]);
        if ok {
            Ok(StaircaseVector(values))
        } else {
            Err(SchemeError::Shape(format!(
                "{values:?} is not an ({m}, {})-nondecreasing vector",
                values.len()
            )))
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

pub(crate) fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `ker Mᵀ ⊆ ℝ e_n`, i.e. `rank M = n − 1` and `Mᵀ e_n = 0`.
pub fn check_kernel_condition(m: &DMatrix<f64>) -> CheckResult {
    const NAME: &str = "kernel";
    let n = m.nrows();
    if n < 2 || m.ncols() != n - 1 {
        return CheckResult::new(
            NAME,
            false,
            format!("M must be n×(n−1) with n ≥ 2, got {}×{}", n, m.ncols()),
            None,
        );
    }
    // pad with a zero column so the SVD returns a full n×n left basis
    let mut padded = DMatrix::zeros(n, n);
    padded.view_mut((0, 0), (n, n - 1)).copy_from(m);
    let svd = SVD::new(padded, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let tol = 1e-10 * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();

    let col_sums: Vec<f64> = (0..n - 1).map(|j| m.column(j).sum()).collect();
    let mte_norm = col_sums.iter().map(|v| v * v).sum::<f64>().sqrt();
    let annihilates = sigma_max > 0.0 && mte_norm <= tol * (n as f64).sqrt();

    if rank == n - 1 && annihilates {
        return CheckResult::new(NAME, true, "ker Mᵀ = span{e_n}", Some(Witness::Rank(rank)));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > tol {
            continue;
        }
        let mut w: Vec<f64> = u.column(k).iter().copied().collect();
        if annihilates {
            let mean = w.iter().sum::<f64>() / n as f64;
            w.iter_mut().for_each(|v| *v -= mean);
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if best.as_ref().is_none_or(|(b, _)| norm > *b) {
            best = Some((norm, w));
        }
    }
    let witness = best.map(|(norm, w)| {
        Witness::KernelVector(w.into_iter().map(|v| v / norm).collect())
    });
    let detail = if rank != n - 1 {
        format!("rank M = {rank}, expected {}", n - 1)
    } else {
        format!("‖Mᵀe_n‖ = {mte_norm:e}, so e_n ∉ ker Mᵀ")
    };
    CheckResult::new(NAME, false, detail, witness)
}

fn nonzero(v: f64) -> bool {
    v != 0.0
}

/// Finds an `(m, n)`-nondecreasing `A` with `C ∈ S(A)` and `Qᵀ ∈ S^c(A)`.
///
/// Each row `i` gives bounds `lo_i <= A_i <= hi_i`: `lo_i` is the last
/// nonzero column of `C` in row `i`, `hi_i` is one less than the first forward
/// operator whose input reads block `i`. The pointwise-smallest nondecreasing
/// fill of the lower bounds is feasible iff any staircase vector is.
pub fn find_staircase_vector(
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<StaircaseVector, SchemeError> {
    let n = c.nrows();
    let m = c.ncols();
    if q.nrows() != m || q.ncols() != n {
        return Err(SchemeError::Shape(format!(
            "C is {n}×{m}, so Q must be {m}×{n}, got {}×{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if n == 0 {
        return Err(SchemeError::Shape("C has no rows".into()));
    }
    let lo: Vec<usize> = (0..n)
        .map(|i| (0..m).rev().find(|&j| nonzero(c[(i, j)])).map_or(0, |j| j + 1))
        .collect();
    let hi: Vec<usize> = (0..n)
        .map(|i| (0..m).find(|&j| nonzero(q[(j, i)])).unwrap_or(m))
        .collect();

    let mut a = vec![0usize; n];
    for i in 0..n {
        a[i] = if i == 0 {
            0
        } else if i == n - 1 {
            m
        } else {
            lo[i].max(a[i - 1])
        };
        if a[i] < lo[i] {
            // C[i, lo_i − 1] lies right of the staircase
            return Err(SchemeError::CausalityViolation {
                matrix: "C".into(),
                row: i,
                col: lo[i] - 1,
            });
        }
        if a[i] > hi[i] {
            // Q[hi_i, i] would read block i before it is computed
            return Err(SchemeError::CausalityViolation {
                matrix: "Q".into(),
                row: hi[i],
                col: i,
            });
        }
    }
    StaircaseVector::new(a, m)
}

pub(crate) fn check_causality(c: &DMatrix<f64>, q: &DMatrix<f64>) -> CheckResult {
    const NAME: &str = "causality";
    match find_staircase_vector(c, q) {
        Ok(a) => CheckResult::new(
            NAME,
            true,
            "C, Qᵀ admit a staircase vector",
            Some(Witness::Staircase(a.0)),
        ),
        Err(SchemeError::CausalityViolation { matrix, row, col }) => {
            let value = if matrix == "C" { c[(row, col)] } else { q[(row, col)] };
            CheckResult::new(
                NAME,
                false,
                format!("{matrix}[{row},{col}] violates every staircase vector"),
                Some(Witness::Entry {
                    matrix,
                    row,
                    col,
                    value,
                }),
            )
        }
        Err(e) => CheckResult::new(NAME, false, e.to_string(), None),
    }
}

/// `Cᵀ e_n = e_m` and `Q e_n = e_m` to within `1e-12`.
pub fn check_row_sums(c: &DMatrix<f64>, q: &DMatrix<f64>) -> CheckResult {
    const NAME: &str = "row_sums";
    let c_sums: Vec<f64> = (0..c.ncols()).map(|j| c.column(j).sum()).collect();
    let q_sums: Vec<f64> = (0..q.nrows()).map(|j| q.row(j).sum()).collect();
    if let Some(j) = c_sums.iter().position(|s| (s - 1.0).abs() > 1e-12) {
        return CheckResult::new(
            NAME,
            false,
            format!("column {j} of C sums to {}", c_sums[j]),
            Some(Witness::Sums(c_sums)),
        );
    }
    if let Some(j) = q_sums.iter().position(|s| (s - 1.0).abs() > 1e-12) {
        return CheckResult::new(
            NAME,
            false,
            format!("row {j} of Q sums to {}", q_sums[j]),
            Some(Witness::Sums(q_sums)),
        );
    }
    CheckResult::new(NAME, true, "all line sums equal 1", None)
}

/// `(Cᵀ − Q)ᵀ diag(L) (Cᵀ − Q)` scaled by `½(1 + 1/θ)`.
fn forward_coupling(
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lipschitz: &[f64],
    theta: f64,
) -> DMatrix<f64> {
    let diff = c.transpose() - q;
    let mut weighted = diff.clone();
    for (j, l) in lipschitz.iter().enumerate() {
        weighted.row_mut(j).scale_mut(*l);
    }
    diff.transpose() * weighted * (0.5 * (1.0 + 1.0 / theta))
}

pub(crate) fn psd_margin_matrix(
    s: &DMatrix<f64>,
    m: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lipschitz: &[f64],
    theta: f64,
) -> DMatrix<f64> {
    s - m * m.transpose() - forward_coupling(c, q, lipschitz, theta)
}

fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Outcome of [`check_psd_condition`].
#[derive(Clone, Debug, PartialEq)]
pub struct PsdOutcome {
    pub passed: bool,
    pub min_eigenvalue: f64,
    pub quadratic_form: f64,
}

/// `S − MMᵀ − ½(1+1/θ)(Cᵀ−Q)ᵀ L^{-1} (Cᵀ−Q) ⪰ 0` and `e_nᵀ S e_n = 0`.
///
/// `lipschitz` holds `L_1, …, L_m`, i.e. the diagonal of `L^{-1}`.
pub fn check_psd_condition(
    s: &DMatrix<f64>,
    m: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lipschitz: &[f64],
    theta: f64,
) -> PsdOutcome {
    let scale = 1.0 + frobenius(s);
    let min_eigenvalue = min_eigenvalue(&psd_margin_matrix(s, m, c, q, lipschitz, theta));
    let quadratic_form = s.sum();
    PsdOutcome {
        passed: min_eigenvalue >= -1e-9 * scale && quadratic_form.abs() <= 1e-10 * scale,
        min_eigenvalue,
        quadratic_form,
    }
}

/// `S = MMᵀ + ½(1+1/θ)(Cᵀ−Q)ᵀ L^{-1} (Cᵀ−Q)`, the largest-stepsize choice.
pub fn build_default_s(
    m: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lipschitz: &[f64],
    theta: f64,
) -> Result<DMatrix<f64>, SchemeError> {
    let n = m.nrows();
    if c.nrows() != n || q.ncols() != n || q.nrows() != c.ncols() || lipschitz.len() != c.ncols()
    {
        return Err(SchemeError::Shape(format!(
            "inconsistent shapes: M {}×{}, C {}×{}, Q {}×{}, {} constants",
            m.nrows(),
            m.ncols(),
            c.nrows(),
            c.ncols(),
            q.nrows(),
            q.ncols(),
            lipschitz.len()
        )));
    }
    if !(theta > 0.0) {
        return Err(SchemeError::InvalidParameter(format!("theta must be positive, got {theta}")));
    }
    let s = m * m.transpose() + forward_coupling(c, q, lipschitz, theta);
    if let Some(i) = (0..n).find(|&i| s[(i, i)] <= 1e-12) {
        return Err(SchemeError::DegenerateStepsize {
            index: i,
            value: s[(i, i)],
        });
    }
    Ok(s)
}

/// `d_i = 2 / S_ii`.
pub fn compute_stepsizes(s: &DMatrix<f64>) -> Result<Vec<f64>, SchemeError> {
    (0..s.nrows())
        .map(|i| {
            let sii = s[(i, i)];
            if sii > 0.0 && sii.is_finite() {
                Ok(2.0 / sii)
            } else {
                Err(SchemeError::DegenerateStepsize { index: i, value: sii })
            }
        })
        .collect()
}

/// Runs every condition on a matrix tuple and collects the outcomes.
pub fn validate(
    m: &DMatrix<f64>,
    s: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lipschitz: &[f64],
    theta: f64,
) -> ValidationReport {
    let n = s.nrows();
    let nf = c.ncols();
    let shape_ok = n >= 2
        && s.ncols() == n
        && m.nrows() == n
        && m.ncols() == n - 1
        && c.nrows() == n
        && q.nrows() == nf
        && q.ncols() == n
        && lipschitz.len() == nf;
    let mut report = ValidationReport::default();
    report.checks.push(CheckResult::new(
        "shape",
        shape_ok,
        format!(
            "M {}×{}, S {}×{}, C {}×{}, Q {}×{}, {} constants",
            m.nrows(),
            m.ncols(),
            s.nrows(),
            s.ncols(),
            c.nrows(),
            c.ncols(),
            q.nrows(),
            q.ncols(),
            lipschitz.len()
        ),
        None,
    ));
    if !shape_ok {
        return report;
    }
    let params_ok = theta > 0.0
        && theta.is_finite()
        && lipschitz.iter().all(|l| *l > 0.0 && l.is_finite());
    report.checks.push(CheckResult::new(
        "parameters",
        params_ok,
        format!("theta = {theta}, L = {lipschitz:?}"),
        None,
    ));

    report.checks.push(check_kernel_condition(m));
    report.checks.push(check_causality(c, q));
    report.checks.push(check_row_sums(c, q));

    let scale = 1.0 + frobenius(s);
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| ((s[(i, j)] - s[(j, i)]).abs(), i, j))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((0.0, 0, 0));
    let symmetric = asym.0 <= 1e-12 * scale;
    report.checks.push(CheckResult::new(
        "symmetry",
        symmetric,
        format!("max |S_ij − S_ji| = {:e}", asym.0),
        (!symmetric).then(|| Witness::Entry {
            matrix: "S".into(),
            row: asym.1,
            col: asym.2,
            value: s[(asym.1, asym.2)],
        }),
    ));

    let bad_diag = (0..n).find(|&i| !(s[(i, i)] > 0.0));
    report.checks.push(CheckResult::new(
        "positive_diagonal",
        bad_diag.is_none(),
        match bad_diag {
            Some(i) => format!("S[{i},{i}] = {} is not positive", s[(i, i)]),
            None => "all S_ii > 0".to_string(),
        },
        bad_diag.map(|i| Witness::Entry {
            matrix: "S".into(),
            row: i,
            col: i,
            value: s[(i, i)],
        }),
    ));

    let psd = check_psd_condition(s, m, c, q, lipschitz, theta);
    let form_ok = psd.quadratic_form.abs() <= 1e-10 * scale;
    report.checks.push(CheckResult::new(
        "consensus_form",
        form_ok,
        format!("e_nᵀ S e_n = {:e}", psd.quadratic_form),
        Some(Witness::QuadraticForm(psd.quadratic_form)),
    ));
    let eig_ok = psd.min_eigenvalue >= -1e-9 * scale;
    report.checks.push(CheckResult::new(
        "psd",
        eig_ok,
        format!("λ_min = {:e}", psd.min_eigenvalue),
        Some(Witness::MinEigenvalue(psd.min_eigenvalue)),
    ));
    report
}
