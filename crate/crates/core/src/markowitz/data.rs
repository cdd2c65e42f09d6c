use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};

use super::MarkowitzError;

/// Daily returns, one row per day and one column per asset.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketData {
    returns: DMatrix<f64>,
}

impl MarketData {
    pub fn new(returns: DMatrix<f64>) -> Result<Self, MarkowitzError> {
        if returns.nrows() < 2 || returns.ncols() == 0 {
            return Err(MarkowitzError::InsufficientData {
                days: returns.nrows(),
                assets: returns.ncols(),
            });
        }
        if !returns.iter().all(|v| v.is_finite()) {
            return Err(MarkowitzError::InvalidData("returns must be finite".into()));
        }
        Ok(MarketData { returns })
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn days(&self) -> usize {
        self.returns.nrows()
    }

    pub fn assets(&self) -> usize {
        self.returns.ncols()
    }
}

fn parse_field(field: &str) -> Option<f64> {
    // tolerate typographic minus signs in hand-edited files
    field.trim().replace('\u{2212}', "-").parse().ok()
}

/// Parses a rectangular numeric CSV. A first row that is not entirely
/// numeric is taken as a header and skipped.
pub fn parse_returns<R: Read>(reader: R) -> Result<MarketData, MarkowitzError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| MarkowitzError::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Option<Vec<f64>> = record.iter().map(parse_field).collect();
        let values = match parsed {
            Some(v) => v,
            None if idx == 0 => continue,
            None => {
                return Err(MarkowitzError::Parse {
                    line,
                    message: "non-numeric field".into(),
                })
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(MarkowitzError::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", values.len()),
                })
            }
            Some(_) => {}
        }
        rows.push(values);
    }
    let p = width.unwrap_or(0);
    let returns = DMatrix::from_fn(rows.len(), p, |t, i| rows[t][i]);
    MarketData::new(returns)
}

pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<MarketData, MarkowitzError> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| MarkowitzError::Io(format!("{}: {e}", path.display())))?;
    parse_returns(file)
}

/// Column means and the `1/(T−1)` sample covariance, symmetrized.
pub fn estimate_moments(data: &MarketData) -> (DMatrix<f64>, Vec<f64>) {
    let x = data.returns();
    let t = x.nrows() as f64;
    let r: Vec<f64> = x.column_iter().map(|c| c.sum() / t).collect();
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-r[j]);
    }
    let cov = centered.transpose() * &centered / (t - 1.0);
    let lambda = (&cov + cov.transpose()) * 0.5;
    (lambda, r)
}

/// Three-factor model: `r_t = α + B f_t + ε_t`, idiosyncratic `σ = 0.01`.
pub fn synthetic_instance(seed: u64, days: usize, assets: usize) -> Result<MarketData, MarkowitzError> {
    const FACTORS: usize = 3;
    const IDIO: f64 = 0.01;
    const FACTOR_VOL: [f64; FACTORS] = [0.012, 0.006, 0.004];
    if days < 2 || assets == 0 {
        return Err(MarkowitzError::InsufficientData { days, assets });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift = Normal::new(4e-4, 4e-4).expect("valid normal");
    let alpha: Vec<f64> = (0..assets).map(|_| drift.sample(&mut rng)).collect();
    let loadings = DMatrix::from_fn(assets, FACTORS, |_, k| {
        let z: f64 = StandardNormal.sample(&mut rng);
        if k == 0 {
            1.0 + 0.3 * z
        } else {
            0.5 * z
        }
    });
    let mut returns = DMatrix::zeros(days, assets);
    for t in 0..days {
        let f: Vec<f64> = FACTOR_VOL
            .iter()
            .map(|vol| vol * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for i in 0..assets {
            let systematic: f64 = (0..FACTORS).map(|k| loadings[(i, k)] * f[k]).sum();
            let noise: f64 = rng.sample(StandardNormal);
            returns[(t, i)] = alpha[i] + systematic + IDIO * noise;
        }
    }
    MarketData::new(returns)
}

/// The window `shift` days later: drops the first `shift` rows and repeats the last `shift`.
pub fn shift_window(data: &MarketData, shift: usize) -> Result<MarketData, MarkowitzError> {
    let t = data.days();
    if shift >= t {
        return Err(MarkowitzError::InsufficientData {
            days: t,
            assets: data.assets(),
        });
    }
    let x = data.returns();
    let shifted = DMatrix::from_fn(t, data.assets(), |row, col| {
        let src = row + shift;
        if src < t {
            x[(src, col)]
        } else {
            x[(src - shift, col)]
        }
    });
    MarketData::new(shifted)
}

/// A uniform sample from the standard simplex (normalized exponentials).
pub fn sample_simplex(seed: u64, p: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}
