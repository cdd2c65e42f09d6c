use nalgebra::{DMatrix, SymmetricEigen};

use super::MarkowitzError;
use crate::operators::{CocoerciveOp, MonotoneOp, Problem};

/// `min_{x∈Δ} ½xᵀΛx − rᵀx + δ/2‖x‖² + Σ|x_i − x0_i| + Σ|x_i − x0_i|^{3/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkowitzProblem {
    pub lambda: DMatrix<f64>,
    pub r: Vec<f64>,
    pub delta: f64,
    pub x0: Vec<f64>,
}

impl MarkowitzProblem {
    pub fn new(lambda: DMatrix<f64>, r: Vec<f64>, delta: f64, x0: Vec<f64>) -> Result<Self, MarkowitzError> {
        let mp = MarkowitzProblem { lambda, r, delta, x0 };
        mp.check()?;
        Ok(mp)
    }

    pub fn assets(&self) -> usize {
        self.r.len()
    }

    fn check(&self) -> Result<(), MarkowitzError> {
        let p = self.r.len();
        if p == 0 || self.lambda.shape() != (p, p) || self.x0.len() != p {
            return Err(MarkowitzError::InvalidParameter(format!(
                "inconsistent sizes: Lambda {:?}, r {}, x0 {}",
                self.lambda.shape(),
                p,
                self.x0.len()
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(MarkowitzError::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        let finite = self.lambda.iter().chain(&self.r).chain(&self.x0).all(|v| v.is_finite());
        if !finite {
            return Err(MarkowitzError::InvalidParameter("non-finite problem data".into()));
        }
        let scale = 1.0 + self.lambda.amax();
        if (&self.lambda - self.lambda.transpose()).amax() > 1e-12 * scale {
            return Err(MarkowitzError::InvalidParameter("Lambda is not symmetric".into()));
        }
        if self.min_eigenvalue() < -1e-10 {
            return Err(MarkowitzError::InvalidParameter("Lambda is not positive semidefinite".into()));
        }
        Ok(())
    }

    fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.lambda.clone()).eigenvalues.iter().copied().collect()
    }

    fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `L_1 = λ_max(Λ)`, floored so a constant gradient still has a valid constant.
    pub fn lipschitz_quadratic(&self) -> f64 {
        self.eigenvalues().into_iter().fold(0.0, f64::max).max(1e-12)
    }

    /// `(L_1, L_2) = (λ_max(Λ), δ)`.
    pub fn lipschitz(&self) -> [f64; 2] {
        [self.lipschitz_quadratic(), self.delta]
    }

    /// Objective value without the simplex indicator.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let p = self.assets();
        let mut quad = 0.0;
        for i in 0..p {
            for j in 0..p {
                quad += x[i] * self.lambda[(i, j)] * x[j];
            }
        }
        let lin: f64 = self.r.iter().zip(x).map(|(a, b)| a * b).sum();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let dev: f64 = x
            .iter()
            .zip(&self.x0)
            .map(|(a, b)| {
                let d = (a - b).abs();
                d + d.powf(1.5)
            })
            .sum();
        0.5 * quad - lin + 0.5 * self.delta * sq + dev
    }
}

/// `F_1 = ∂g_1`, `F_2 = ∂g_2`, `F_3 = N_Δ`; `B_1 = ∇f_1`, `B_2 = ∇f_2`.
pub fn build_problem(mp: &MarkowitzProblem) -> Result<Problem, MarkowitzError> {
    mp.check()?;
    let p = mp.assets();
    let [l1, l2] = mp.lipschitz();
    let b1 = CocoerciveOp::affine_with_constant(mp.lambda.clone(), mp.r.clone(), l1)?;
    let b2 = CocoerciveOp::affine_with_constant(DMatrix::identity(p, p) * mp.delta, vec![0.0; p], l2)?;
    let resolvents = vec![
        MonotoneOp::shifted_l1(mp.x0.clone()),
        MonotoneOp::shifted_power32(mp.x0.clone()),
        MonotoneOp::simplex(),
    ];
    Ok(Problem::new(p, resolvents, vec![b1, b2])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_example() {
        let mp = MarkowitzProblem::new(DMatrix::identity(2, 2), vec![0.0; 2], 6.0, vec![0.0; 2]).unwrap();
        let pr = build_problem(&mp).unwrap();
        assert_eq!((pr.n(), pr.m()), (3, 2));
        assert_eq!(pr.forwards()[0].eval(&[0.3, -2.0]), vec![0.3, -2.0]);
        assert_eq!(pr.forwards()[1].eval(&[0.5, 1.0]), vec![3.0, 6.0]);
        let l = pr.lipschitz();
        assert!((l[0] - 1.0).abs() < 1e-14);
        assert_eq!(l[1], 6.0);
        for step in [0.1, 1.0, 7.0] {
            assert_eq!(pr.resolvents()[2].resolvent(step, &[1.0, 1.0]), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn rejects_bad_delta() {
        let err = MarkowitzProblem::new(DMatrix::identity(2, 2), vec![0.0; 2], 0.0, vec![0.5; 2]);
        assert!(matches!(err, Err(MarkowitzError::InvalidParameter(_))));
        let err = MarkowitzProblem::new(DMatrix::identity(2, 2), vec![0.0; 2], -1.0, vec![0.5; 2]);
        assert!(matches!(err, Err(MarkowitzError::InvalidParameter(_))));
    }

    #[test]
    fn rejects_indefinite_lambda() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(MarkowitzProblem::new(l, vec![0.0; 2], 6.0, vec![0.5; 2]).is_err());
    }

    #[test]
    fn objective_example() {
        let mp = MarkowitzProblem::new(DMatrix::identity(2, 2), vec![1.0, 0.0], 2.0, vec![0.0, 1.0]).unwrap();
        // ½·1 − 1 + 1 + (1 + 1) + (1 + 1)
        assert!((mp.objective(&[1.0, 0.0]) - 4.5).abs() < 1e-15);
    }
}
