//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// `log Σ exp(v_i)` with max-subtraction.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Log-softmax of a score vector.
pub fn log_softmax(scores: &DVector<f64>) -> DVector<f64> {
    let lse = log_sum_exp(scores.as_slice());
    scores.map(|s| s - lse)
}

/// Probabilities of a score vector.
pub fn softmax(scores: &DVector<f64>) -> DVector<f64> {
    log_softmax(scores).map(f64::exp)
}

/// `E_p[a]`.
pub fn mean(p: &DVector<f64>, a: &DVector<f64>) -> f64 {
    p.dot(a)
}

/// `Var_p[a]`, computed around the mean to avoid cancellation.
pub fn variance(p: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let mu = mean(p, a);
    p.iter()
        .zip(a.iter())
        .map(|(pi, ai)| pi * (ai - mu) * (ai - mu))
        .sum()
}

/// Index of the largest entry (first one on ties).
pub fn argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Orthonormal basis (as columns) of the complement of the all-ones vector in `R^n`.
pub fn centered_basis(n: usize) -> DMatrix<f64> {
    // Helmert contrasts.
    let mut q = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

/// Reshape a row-major flattened square matrix.
pub fn unflatten_square(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

/// Row-major flattening of a matrix.
pub fn flatten_row_major(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        m.nrows() * m.ncols(),
        (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])),
    )
}

/// Standard normal matrix.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniform sample from the Frobenius ball of the given radius.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, rows: usize, cols: usize, radius: f64) -> DMatrix<f64> {
    let dir = gaussian_matrix(rng, rows, cols);
    let norm = dir.norm();
    let dim = (rows * cols) as f64;
    let r = radius * rng.gen::<f64>().powf(1.0 / dim);
    if norm == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    dir * (r / norm)
}
