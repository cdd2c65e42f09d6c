//! JSON form of a scheme.
//!
//! Explicit matrices use row-major nested arrays under the keys `"M"`, `"S"`,
//! `"C"`, `"Q"` plus `"theta"`; omitting `"S"` selects [`build_default_s`].
//! `"L"` optionally lists the cocoercivity constants (default: all ones).
//! Built-ins are written as `{"builtin": {"kind": "douglas_rachford", "gamma": 1.0}}`.
//!
//! [`build_default_s`]: super::build_default_s

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    build_default_s, validate, BuiltinScheme, CheckResult, Scheme, SchemeError, ValidationReport,
};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitScheme {
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C", default)]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Q", default)]
    pub q: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeSpec {
    Builtin {
        builtin: BuiltinScheme,
        #[serde(default = "one")]
        theta: f64,
        #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<Vec<f64>>,
    },
    Explicit(ExplicitScheme),
}

fn to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>, SchemeError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(SchemeError::Parse(format!(
            "{name}: row {i} has {} entries, expected {ncols}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn from_matrix(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

struct Parts {
    m: DMatrix<f64>,
    s: Option<DMatrix<f64>>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl ExplicitScheme {
    pub(super) fn from_scheme(scheme: &Scheme) -> Self {
        ExplicitScheme {
            m: from_matrix(scheme.m_matrix()),
            s: Some(from_matrix(scheme.s_matrix())),
            c: from_matrix(scheme.c_matrix()),
            q: from_matrix(scheme.q_matrix()),
            theta: scheme.theta(),
            lipschitz: Some(scheme.lipschitz().to_vec()),
        }
    }

    fn parts(&self) -> Result<Parts, SchemeError> {
        let m = to_matrix(&self.m, "M")?;
        let n = m.nrows();
        let c = if self.c.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            to_matrix(&self.c, "C")?
        };
        let q = if self.q.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            to_matrix(&self.q, "Q")?
        };
        let s = self.s.as_ref().map(|s| to_matrix(s, "S")).transpose()?;
        Ok(Parts { m, s, c, q })
    }

    fn constants(&self, num_forward: usize, over: Option<&[f64]>) -> Vec<f64> {
        over.map(<[f64]>::to_vec)
            .or_else(|| self.lipschitz.clone())
            .unwrap_or_else(|| vec![1.0; num_forward])
    }
}

impl SchemeSpec {
    pub fn from_json(text: &str) -> Result<Self, SchemeError> {
        serde_json::from_str(text).map_err(|e| SchemeError::Parse(e.to_string()))
    }

    pub fn theta(&self) -> f64 {
        match self {
            SchemeSpec::Builtin { theta, .. } => *theta,
            SchemeSpec::Explicit(e) => e.theta,
        }
    }

    /// Replaces θ, e.g. from a run schedule.
    pub fn with_theta(mut self, value: f64) -> Self {
        match &mut self {
            SchemeSpec::Builtin { theta, .. } => *theta = value,
            SchemeSpec::Explicit(e) => e.theta = value,
        }
        self
    }

    pub fn describe(&self) -> String {
        match self {
            SchemeSpec::Builtin { builtin, .. } => builtin.name(),
            SchemeSpec::Explicit(e) => format!("explicit(n={})", e.m.len()),
        }
    }

    /// Builds and validates. `lipschitz`, when given, overrides the constants in the spec.
    pub fn build(&self, lipschitz: Option<&[f64]>) -> Result<Scheme, SchemeError> {
        match self {
            SchemeSpec::Builtin {
                builtin,
                theta,
                lipschitz: own,
            } => {
                let l = lipschitz
                    .map(<[f64]>::to_vec)
                    .or_else(|| own.clone())
                    .unwrap_or_else(|| vec![1.0; builtin.num_forward()]);
                builtin.build(*theta, &l)
            }
            SchemeSpec::Explicit(e) => {
                let p = e.parts()?;
                let l = e.constants(p.c.ncols(), lipschitz);
                match p.s {
                    Some(s) => Scheme::new(p.m, s, p.c, p.q, e.theta, l),
                    None => Scheme::with_default_s(p.m, p.c, p.q, e.theta, l),
                }
            }
        }
    }

    /// Full validation report. Only malformed matrices produce an error; any
    /// construction failure is reported as a failed `construction` check.
    pub fn report(&self, lipschitz: Option<&[f64]>) -> Result<ValidationReport, SchemeError> {
        let outcome = match self {
            SchemeSpec::Builtin { .. } => self.build(lipschitz).map(|s| s.report().clone()),
            SchemeSpec::Explicit(e) => {
                let p = e.parts()?;
                let l = e.constants(p.c.ncols(), lipschitz);
                let s = match p.s {
                    Some(s) => Ok(s),
                    None => build_default_s(&p.m, &p.c, &p.q, &l, e.theta),
                };
                s.map(|s| validate(&p.m, &s, &p.c, &p.q, &l, e.theta))
            }
        };
        match outcome {
            Ok(r) => Ok(r),
            Err(SchemeError::Invalid(r)) => Ok(r),
            Err(SchemeError::Parse(msg)) => Err(SchemeError::Parse(msg)),
            Err(other) => Ok(ValidationReport {
                checks: vec![CheckResult {
                    name: "construction".into(),
                    passed: false,
                    detail: other.to_string(),
                    witness: None,
                }],
            }),
        }
    }
}
