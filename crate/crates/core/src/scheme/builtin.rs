use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Scheme, SchemeError};

fn one() -> f64 {
    1.0
}

/// Ready-made schemes.
///
/// `douglas_rachford` reproduces the classical two-operator method exactly.
/// `davis_yin` and `chain_fb` are default constructions that satisfy every
/// validator; they are not tuned reproductions of any published matrix set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinScheme {
    /// `n = 2`, `m = 0`, `M = √(2/γ)[1; −1]`, `S = (2/γ)[[1, −1], [−1, 1]]`, so `d = (γ, γ)`.
    DouglasRachford { gamma: f64 },
    /// `n = 2`, `m = 1`: `B` is evaluated at `x_1` and fed to block 2.
    /// `M = a[1; −1]` with `a` chosen so that `d_1 = γ`.
    DavisYin { gamma: f64 },
    /// Path-graph lifting over `n` blocks with `m <= n − 1` forward operators.
    /// `B_j` reads the average of blocks `1..=j` and feeds block `j + 1`.
    /// `M = √(2/γ)` times the path incidence matrix.
    ChainFb {
        n: usize,
        m: usize,
        #[serde(default = "one")]
        gamma: f64,
    },
}

impl BuiltinScheme {
    pub fn name(&self) -> String {
        match self {
            BuiltinScheme::DouglasRachford { gamma } => format!("douglas_rachford(gamma={gamma})"),
            BuiltinScheme::DavisYin { gamma } => format!("davis_yin(gamma={gamma})"),
            BuiltinScheme::ChainFb { n, m, gamma } => format!("chain_fb(n={n},m={m},gamma={gamma})"),
        }
    }

    pub fn num_resolvents(&self) -> usize {
        match self {
            BuiltinScheme::DouglasRachford { .. } | BuiltinScheme::DavisYin { .. } => 2,
            BuiltinScheme::ChainFb { n, .. } => *n,
        }
    }

    pub fn num_forward(&self) -> usize {
        match self {
            BuiltinScheme::DouglasRachford { .. } => 0,
            BuiltinScheme::DavisYin { .. } => 1,
            BuiltinScheme::ChainFb { m, .. } => *m,
        }
    }

    pub fn build(&self, theta: f64, lipschitz: &[f64]) -> Result<Scheme, SchemeError> {
        if lipschitz.len() != self.num_forward() {
            return Err(SchemeError::Shape(format!(
                "{} expects {} cocoercivity constants, got {}",
                self.name(),
                self.num_forward(),
                lipschitz.len()
            )));
        }
        match *self {
            BuiltinScheme::DouglasRachford { gamma } => {
                positive("gamma", gamma)?;
                let m = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]) * (2.0 / gamma).sqrt();
                let s = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) * (2.0 / gamma);
                Scheme::new(m, s, DMatrix::zeros(2, 0), DMatrix::zeros(0, 2), theta, vec![])
            }
            BuiltinScheme::DavisYin { gamma } => {
                positive("gamma", gamma)?;
                positive("theta", theta)?;
                // S = (a² + ½(1+1/θ)L)[[1,−1],[−1,1]] and d_1 = 2/S_11 = γ
                let a2 = 2.0 / gamma - 0.5 * (1.0 + 1.0 / theta) * lipschitz[0];
                if !(a2 > 0.0) {
                    return Err(SchemeError::InvalidParameter(format!(
                        "davis_yin needs gamma < 4θ/((1+θ)L) = {}, got {gamma}",
                        4.0 * theta / ((1.0 + theta) * lipschitz[0])
                    )));
                }
                let m = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]) * a2.sqrt();
                let c = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
                let q = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
                Scheme::with_default_s(m, c, q, theta, lipschitz.to_vec())
            }
            BuiltinScheme::ChainFb { n, m, gamma } => {
                positive("gamma", gamma)?;
                if n < 2 {
                    return Err(SchemeError::Unsupported(format!("chain_fb needs n >= 2, got {n}")));
                }
                if m > n - 1 {
                    return Err(SchemeError::InvalidParameter(format!(
                        "chain_fb needs m <= n - 1, got n = {n}, m = {m}"
                    )));
                }
                let scale = (2.0 / gamma).sqrt();
                let mm = DMatrix::from_fn(n, n - 1, |i, j| {
                    if i == j {
                        scale
                    } else if i == j + 1 {
                        -scale
                    } else {
                        0.0
                    }
                });
                let c = DMatrix::from_fn(n, m, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
                let q = DMatrix::from_fn(m, n, |j, h| if h <= j { 1.0 / (j + 1) as f64 } else { 0.0 });
                Scheme::with_default_s(mm, c, q, theta, lipschitz.to_vec())
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), SchemeError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SchemeError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}
