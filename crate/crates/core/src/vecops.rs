//! Small dense-vector helpers shared by the solver and the operator library.
//!
//! Points of the base space are `Vec<f64>`; stacked iterates such as `z` or `x`
//! are `Vec<Vec<f64>>` with one block per copy of the base space.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `acc += alpha * x`
pub(crate) fn axpy(acc: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, xi) in acc.iter_mut().zip(x) {
        *a += alpha * xi;
    }
}

pub(crate) fn zeros(blocks: usize, dim: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; dim]; blocks]
}

pub(crate) fn blocks_norm_sq(a: &[Vec<f64>]) -> f64 {
    a.iter().map(|b| norm_sq(b)).sum()
}

pub(crate) fn blocks_dist_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = dist(x, y);
            d * d
        })
        .sum()
}

/// `a - b`, blockwise.
pub(crate) fn blocks_sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

pub(crate) fn blocks_scale(a: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    a.iter()
        .map(|x| x.iter().map(|v| v * s).collect())
        .collect()
}

pub(crate) fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}
