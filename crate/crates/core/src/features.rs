//! Enumerated solution spaces and their feature tables.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Combinatorial labels of an enumerated solution space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SolutionSpace {
    /// All sign vectors in `{±1}^n`; bit `i` of the index set means `s_i = -1`.
    Hypercube { n: usize },
    /// All permutations of `0..n`, `perm[i] = π(i)`.
    Permutations { n: usize, perms: Vec<Vec<usize>> },
    /// All single `n`-cycles as successor maps.
    Cycles { n: usize, successors: Vec<Vec<usize>> },
    /// Arbitrary feature points with no combinatorial structure.
    Points { count: usize },
}

impl SolutionSpace {
    pub fn len(&self) -> usize {
        match self {
            SolutionSpace::Hypercube { n } => 1usize << n,
            SolutionSpace::Permutations { perms, .. } => perms.len(),
            SolutionSpace::Cycles { successors, .. } => successors.len(),
            SolutionSpace::Points { count } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sign vector of a hypercube index.
    pub fn signs(n: usize, index: usize) -> Vec<i8> {
        (0..n)
            .map(|i| if (index >> i) & 1 == 1 { -1 } else { 1 })
            .collect()
    }

    /// Human-readable label, e.g. `+-+` or `[1,2,0]`.
    pub fn label(&self, index: usize) -> String {
        let list = |v: &[usize]| {
            let inner: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("[{}]", inner.join(","))
        };
        match self {
            SolutionSpace::Hypercube { n } => Self::signs(*n, index)
                .iter()
                .map(|&s| if s > 0 { '+' } else { '-' })
                .collect(),
            SolutionSpace::Permutations { perms, .. } => list(&perms[index]),
            SolutionSpace::Cycles { successors, .. } => list(&successors[index]),
            SolutionSpace::Points { .. } => format!("x{index}"),
        }
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    loop {
        out.push(current.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

/// All directed Hamiltonian cycles on `0..n` as successor maps.
///
/// Tours are enumerated as orderings of `1..n` after node 0, so each
/// undirected tour appears twice (once per direction).
pub fn cyclic_permutations(n: usize) -> Vec<Vec<usize>> {
    if n < 2 {
        return vec![vec![0; n]];
    }
    permutations(n - 1)
        .into_iter()
        .map(|order| {
            let tour: Vec<usize> = std::iter::once(0).chain(order.iter().map(|v| v + 1)).collect();
            let mut succ = vec![0; n];
            for k in 0..n {
                succ[tour[k]] = tour[(k + 1) % n];
            }
            succ
        })
        .collect()
}

/// Row-major flattened permutation matrix with `Π[i][perm[i]] = 1`.
pub fn permutation_features(n: usize, perms: &[Vec<usize>]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(perms.len(), n * n);
    for (r, p) in perms.iter().enumerate() {
        for (i, &j) in p.iter().enumerate() {
            x[(r, i * n + j)] = 1.0;
        }
    }
    x
}

/// Feature vectors of every enumerated solution.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureTable {
    /// One row per solution.
    Dense(DMatrix<f64>),
    /// Row-major `(s sᵀ)^♭` for each sign row `s`, stored implicitly.
    Outer { signs: DMatrix<f64> },
}

impl FeatureTable {
    /// Implicit correlation features over the whole hypercube `{±1}^n`.
    pub fn hypercube_outer(n: usize) -> Self {
        let m = 1usize << n;
        let signs = DMatrix::from_fn(m, n, |r, i| if (r >> i) & 1 == 1 { -1.0 } else { 1.0 });
        FeatureTable::Outer { signs }
    }

    pub fn len(&self) -> usize {
        match self {
            FeatureTable::Dense(x) => x.nrows(),
            FeatureTable::Outer { signs } => signs.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureTable::Dense(x) => x.ncols(),
            FeatureTable::Outer { signs } => signs.ncols() * signs.ncols(),
        }
    }

    pub fn row(&self, r: usize) -> DVector<f64> {
        match self {
            FeatureTable::Dense(x) => x.row(r).transpose(),
            FeatureTable::Outer { signs } => {
                let n = signs.ncols();
                DVector::from_fn(n * n, |k, _| signs[(r, k / n)] * signs[(r, k % n)])
            }
        }
    }

    /// `X w`: the score `w · x` of every solution.
    pub fn scores(&self, w: &DVector<f64>) -> DVector<f64> {
        match self {
            FeatureTable::Dense(x) => x * w,
            FeatureTable::Outer { signs } => {
                let n = signs.ncols();
                let wm = DMatrix::from_row_slice(n, n, w.as_slice());
                (signs * wm).component_mul(signs).column_sum()
            }
        }
    }

    /// `Xᵀ q`: the `q`-weighted sum of feature vectors.
    pub fn weighted_sum(&self, q: &DVector<f64>) -> DVector<f64> {
        match self {
            FeatureTable::Dense(x) => x.transpose() * q,
            FeatureTable::Outer { signs } => {
                let mut scaled = signs.clone();
                for mut col in scaled.column_iter_mut() {
                    col.component_mul_assign(q);
                }
                let m = signs.transpose() * scaled;
                crate::math::flatten_row_major(&m)
            }
        }
    }

    /// Dense copy of the table.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            FeatureTable::Dense(x) => x.clone(),
            FeatureTable::Outer { signs } => {
                let n = signs.ncols();
                DMatrix::from_fn(signs.nrows(), n * n, |r, k| {
                    signs[(r, k / n)] * signs[(r, k % n)]
                })
            }
        }
    }

    /// Largest feature norm `max_x ‖x‖₂`.
    pub fn max_norm(&self) -> f64 {
        match self {
            // Every entry of s sᵀ is ±1.
            FeatureTable::Outer { signs } => signs.ncols() as f64,
            FeatureTable::Dense(x) => x
                .row_iter()
                .map(|r| r.norm())
                .fold(0.0, f64::max),
        }
    }
}
