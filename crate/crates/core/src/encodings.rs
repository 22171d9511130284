//! Bilinear feature encodings `cost(s) = zᵀ M ψ(s)` for five combinatorial problems.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    cyclic_permutations, permutation_features, permutations, FeatureTable, SolutionSpace,
};
use crate::fourier::fourier_coefficients;
use crate::instance::{AssignmentProblem, CspInstance, Graph};
use crate::math::{centered_basis, flatten_row_major, min_symmetric_eigenvalue};

pub const DEFAULT_ENUMERATION_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    MaxCut,
    MinCut,
    Csp,
    Mwbm,
    Tsp,
    Custom,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "maxcut" => Ok(ProblemKind::MaxCut),
            "mincut" => Ok(ProblemKind::MinCut),
            "csp" | "maxkcsp" => Ok(ProblemKind::Csp),
            "mwbm" | "matching" => Ok(ProblemKind::Mwbm),
            "tsp" => Ok(ProblemKind::Tsp),
            other => Err(Error::Config(format!("unknown problem kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    /// `max ‖ψ(s)‖₂`.
    pub d_s: f64,
    /// `‖z‖₂`.
    pub d_i: f64,
    /// `‖M‖_F`.
    pub c: f64,
}

/// Linear subspace of `R^{n_X}` on which the variance floor is measured.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ParamSubspace {
    Full,
    /// Symmetric matrices with zero diagonal, flattened row-major.
    SymmetricZeroDiagonal { n: usize },
    /// Matrices with zero row and column sums, flattened row-major.
    ZeroRowColSums { n: usize },
    /// Matrices with zero row and column sums and zero diagonal, flattened row-major.
    ZeroRowColSumsZeroDiagonal { n: usize },
    /// Span of the listed coordinate axes.
    Coordinates(Vec<usize>),
}

impl ParamSubspace {
    /// Orthonormal basis as columns of a `dim × k` matrix.
    pub fn basis(&self, dim: usize) -> DMatrix<f64> {
        match self {
            ParamSubspace::Full => DMatrix::identity(dim, dim),
            ParamSubspace::SymmetricZeroDiagonal { n } => {
                let n = *n;
                let k = n * (n - 1) / 2;
                let mut b = DMatrix::zeros(dim, k);
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let mut col = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        b[(i * n + j, col)] = h;
                        b[(j * n + i, col)] = h;
                        col += 1;
                    }
                }
                b
            }
            ParamSubspace::ZeroRowColSums { n } => {
                let n = *n;
                let q = centered_basis(n);
                let mut b = DMatrix::zeros(dim, (n - 1) * (n - 1));
                for a in 0..n - 1 {
                    for c in 0..n - 1 {
                        let col = a * (n - 1) + c;
                        for i in 0..n {
                            for j in 0..n {
                                b[(i * n + j, col)] = q[(i, a)] * q[(j, c)];
                            }
                        }
                    }
                }
                b
            }
            ParamSubspace::ZeroRowColSumsZeroDiagonal { n } => {
                let n = *n;
                let b = ParamSubspace::ZeroRowColSums { n }.basis(dim);
                let diag = DMatrix::from_fn(n, b.ncols(), |i, c| b[(i * n + i, c)]);
                let eig = SymmetricEigen::new(diag.transpose() * diag);
                let keep: Vec<usize> = (0..eig.eigenvalues.len())
                    .filter(|&k| eig.eigenvalues[k] < 1e-10)
                    .collect();
                let null = DMatrix::from_fn(b.ncols(), keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
                b * null
            }
            ParamSubspace::Coordinates(idx) => {
                let mut b = DMatrix::zeros(dim, idx.len());
                for (col, &i) in idx.iter().enumerate() {
                    b[(i, col)] = 1.0;
                }
                b
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeOptions {
    pub enumeration_cap: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemEncoding {
    pub kind: ProblemKind,
    pub space: SolutionSpace,
    pub features: Arc<FeatureTable>,
    pub instance_features: DVector<f64>,
    pub cost_matrix: DMatrix<f64>,
    pub bounds: Bounds,
    pub param_subspace: ParamSubspace,
    /// Parameters constrained to be entrywise nonnegative.
    pub param_cone: bool,
    /// Added to `zᵀ M x` to recover the signed native objective.
    pub cost_offset: f64,
    alpha: OnceLock<f64>,
}

impl ProblemEncoding {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: ProblemKind,
        space: SolutionSpace,
        features: FeatureTable,
        instance_features: DVector<f64>,
        cost_matrix: DMatrix<f64>,
        param_subspace: ParamSubspace,
        param_cone: bool,
        cost_offset: f64,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidInstance("solution space is empty".into()));
        }
        if cost_matrix.nrows() != instance_features.len() || cost_matrix.ncols() != features.dim() {
            return Err(Error::Dimension(format!(
                "M is {}x{}, expected {}x{}",
                cost_matrix.nrows(),
                cost_matrix.ncols(),
                instance_features.len(),
                features.dim()
            )));
        }
        let bounds = Bounds {
            d_s: features.max_norm(),
            d_i: instance_features.norm(),
            c: cost_matrix.norm(),
        };
        Ok(Self {
            kind,
            space,
            features: Arc::new(features),
            instance_features,
            cost_matrix,
            bounds,
            param_subspace,
            param_cone,
            cost_offset,
            alpha: OnceLock::new(),
        })
    }

    /// Arbitrary feature points with a linear cost `c · x`.
    pub fn from_points(points: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let count = points.nrows();
        let m = DMatrix::from_row_slice(1, c.len(), c.as_slice());
        Self::new(
            ProblemKind::Custom,
            SolutionSpace::Points { count },
            FeatureTable::Dense(points),
            DVector::from_element(1, 1.0),
            m,
            ParamSubspace::Full,
            false,
            0.0,
        )
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_x(&self) -> usize {
        self.features.dim()
    }

    pub fn n_z(&self) -> usize {
        self.instance_features.len()
    }

    /// `c = Mᵀ z`, the linear cost vector over features.
    pub fn cost_vector(&self) -> DVector<f64> {
        self.cost_vector_for(&self.instance_features)
    }

    pub fn cost_vector_for(&self, z: &DVector<f64>) -> DVector<f64> {
        self.cost_matrix.tr_mul(z)
    }

    /// `zᵀ M x` for every enumerated solution.
    pub fn costs(&self) -> DVector<f64> {
        self.features.scores(&self.cost_vector())
    }

    /// Native signed objective: `zᵀ M x + cost_offset`.
    pub fn raw_costs(&self) -> DVector<f64> {
        self.costs().add_scalar(self.cost_offset)
    }

    /// `(max - min)` of the solution costs.
    pub fn cost_range(&self) -> f64 {
        let c = self.costs();
        c.max() - c.min()
    }

    /// Minimum eigenvalue of the uniform feature covariance restricted to the parameter subspace.
    pub fn alpha(&self) -> f64 {
        *self.alpha.get_or_init(|| {
            let basis = self.param_subspace.basis(self.n_x());
            if basis.ncols() == 0 {
                return 0.0;
            }
            let y = self.features.to_dense() * basis;
            let m = y.nrows() as f64;
            let mean = y.row_sum().transpose() / m;
            let cov = (y.transpose() * &y) / m - &mean * mean.transpose();
            min_symmetric_eigenvalue(&cov)
        })
    }

    /// The same cost with instance features collapsed to `z = [1]` and `M = cᵀ`.
    ///
    /// Parameters become a single row `w ∈ R^{n_X}`.
    pub fn collapse_instance(&self) -> Self {
        let c = self.cost_vector();
        let m = DMatrix::from_row_slice(1, c.len(), c.as_slice());
        let mut out = Self {
            kind: self.kind,
            space: self.space.clone(),
            features: Arc::clone(&self.features),
            instance_features: DVector::from_element(1, 1.0),
            cost_matrix: m,
            bounds: self.bounds,
            param_subspace: self.param_subspace.clone(),
            param_cone: self.param_cone,
            cost_offset: self.cost_offset,
            alpha: OnceLock::new(),
        };
        out.bounds.d_i = 1.0;
        out.bounds.c = c.norm();
        if let Some(a) = self.alpha.get() {
            let _ = out.alpha.set(*a);
        }
        out
    }

    /// Label of solution `index`.
    pub fn label(&self, index: usize) -> String {
        self.space.label(index)
    }
}

fn check_cap(size: u128, opts: &EncodeOptions) -> Result<()> {
    if size > opts.enumeration_cap as u128 {
        return Err(Error::EnumerationCap {
            size,
            cap: opts.enumeration_cap,
        });
    }
    Ok(())
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product::<u128>().max(1)
}

fn hypercube_size(n: usize) -> u128 {
    if n >= 127 {
        u128::MAX
    } else {
        1u128 << n
    }
}

/// `ψ(s) = (s sᵀ)^♭`, `z = (−L)^♭`, `M = I`; cost is `−4·cut(s)`.
pub fn encode_maxcut(g: &Graph) -> Result<ProblemEncoding> {
    encode_maxcut_with(g, &EncodeOptions::default())
}

pub fn encode_maxcut_with(g: &Graph, opts: &EncodeOptions) -> Result<ProblemEncoding> {
    let n = g.n();
    check_cap(hypercube_size(n), opts)?;
    let z = flatten_row_major(&(-g.laplacian()));
    ProblemEncoding::new(
        ProblemKind::MaxCut,
        SolutionSpace::Hypercube { n },
        FeatureTable::hypercube_outer(n),
        z,
        DMatrix::identity(n * n, n * n),
        ParamSubspace::SymmetricZeroDiagonal { n },
        false,
        0.0,
    )
}

/// `z = A^♭`, `M = −I`, offset `Σ A_ij`; cost is `sᵀ L s`, optimum inside the nonnegative cone.
pub fn encode_mincut(g: &Graph) -> Result<ProblemEncoding> {
    encode_mincut_with(g, &EncodeOptions::default())
}

pub fn encode_mincut_with(g: &Graph, opts: &EncodeOptions) -> Result<ProblemEncoding> {
    let n = g.n();
    check_cap(hypercube_size(n), opts)?;
    let z = flatten_row_major(g.weights());
    let offset = g.weights().sum();
    ProblemEncoding::new(
        ProblemKind::MinCut,
        SolutionSpace::Hypercube { n },
        FeatureTable::hypercube_outer(n),
        z,
        -DMatrix::identity(n * n, n * n),
        ParamSubspace::SymmetricZeroDiagonal { n },
        true,
        offset,
    )
}

/// Index of the monomial `Π_{v∈vars} s_v` in `((1, s)^{⊗k})^♭`.
///
/// The sorted variables are shifted by one and left-padded with the constant coordinate 0.
pub fn csp_monomial_index(n: usize, k: usize, vars: &[usize]) -> usize {
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    let mut digits = vec![0usize; k - sorted.len()];
    digits.extend(sorted.iter().map(|v| v + 1));
    digits.iter().fold(0, |acc, d| acc * (n + 1) + d)
}

/// Augmented tensor features `((1, s)^{⊗k})^♭`; cost is `−(#satisfied predicates)`.
pub fn encode_max_k_csp(csp: &CspInstance) -> Result<ProblemEncoding> {
    encode_max_k_csp_with(csp, &EncodeOptions::default())
}

pub fn encode_max_k_csp_with(csp: &CspInstance, opts: &EncodeOptions) -> Result<ProblemEncoding> {
    csp.validate()?;
    let (n, k) = (csp.n, csp.k);
    check_cap(hypercube_size(n), opts)?;
    let dim = (n as u128 + 1).checked_pow(k as u32).unwrap_or(u128::MAX);
    check_cap(dim, opts)?;
    let dim = dim as usize;

    let m = 1usize << n;
    let mut x = DMatrix::zeros(m, dim);
    let mut digits = vec![0usize; k];
    for r in 0..m {
        let a: Vec<f64> = std::iter::once(1.0)
            .chain((0..n).map(|i| if (r >> i) & 1 == 1 { -1.0 } else { 1.0 }))
            .collect();
        for col in 0..dim {
            let mut rem = col;
            for t in (0..k).rev() {
                digits[t] = rem % (n + 1);
                rem /= n + 1;
            }
            x[(r, col)] = digits.iter().map(|&d| a[d]).product();
        }
    }

    let mut z = DVector::zeros(dim);
    for p in &csp.predicates {
        let table: Vec<f64> = p.table.iter().map(|&t| t as f64).collect();
        let coeffs = fourier_coefficients(&table);
        for (mask, c) in coeffs.iter().enumerate() {
            let vars: Vec<usize> = p
                .vars
                .iter()
                .enumerate()
                .filter(|(j, _)| (mask >> j) & 1 == 1)
                .map(|(_, &v)| v)
                .collect();
            z[csp_monomial_index(n, k, &vars)] -= c;
        }
    }

    let mut coords = Vec::new();
    for mask in 1usize..(1 << n) {
        let vars: Vec<usize> = (0..n).filter(|i| (mask >> i) & 1 == 1).collect();
        if vars.len() <= k {
            coords.push(csp_monomial_index(n, k, &vars));
        }
    }
    coords.sort_unstable();

    ProblemEncoding::new(
        ProblemKind::Csp,
        SolutionSpace::Hypercube { n },
        FeatureTable::Dense(x),
        z,
        DMatrix::identity(dim, dim),
        ParamSubspace::Coordinates(coords),
        false,
        0.0,
    )
}

/// Subtract row means then column means; returns the centered matrix and the grand mean.
pub fn double_center(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (r, c) = a.shape();
    let grand = a.mean();
    let mut out = a.clone();
    for i in 0..r {
        let mu = out.row(i).mean();
        out.row_mut(i).add_scalar_mut(-mu);
    }
    for j in 0..c {
        let mu = out.column(j).mean();
        out.column_mut(j).add_scalar_mut(-mu);
    }
    (out, grand)
}

/// Permutation-matrix features with doubly centered weights; cost is `−(matching weight)`.
pub fn encode_mwbm(ap: &AssignmentProblem) -> Result<ProblemEncoding> {
    encode_mwbm_with(ap, &EncodeOptions::default())
}

pub fn encode_mwbm_with(ap: &AssignmentProblem, opts: &EncodeOptions) -> Result<ProblemEncoding> {
    let n = ap.n;
    if n < 2 {
        return Err(Error::InvalidInstance("matching needs n >= 2".into()));
    }
    check_cap(factorial(n), opts)?;
    let (centered, grand) = double_center(&ap.costs);
    let perms = permutations(n);
    let x = permutation_features(n, &perms);
    ProblemEncoding::new(
        ProblemKind::Mwbm,
        SolutionSpace::Permutations { n, perms },
        FeatureTable::Dense(x),
        -flatten_row_major(&centered),
        DMatrix::identity(n * n, n * n),
        ParamSubspace::ZeroRowColSums { n },
        false,
        -(n as f64) * grand,
    )
}

/// Cyclic-permutation features with doubly centered edge weights; cost is the tour length.
pub fn encode_tsp(ap: &AssignmentProblem) -> Result<ProblemEncoding> {
    encode_tsp_with(ap, &EncodeOptions::default())
}

pub fn encode_tsp_with(ap: &AssignmentProblem, opts: &EncodeOptions) -> Result<ProblemEncoding> {
    let n = ap.n;
    if n < 3 {
        return Err(Error::InvalidInstance("tour needs n >= 3".into()));
    }
    check_cap(factorial(n - 1), opts)?;
    let (centered, grand) = double_center(&ap.costs);
    let successors = cyclic_permutations(n);
    let x = permutation_features(n, &successors);
    ProblemEncoding::new(
        ProblemKind::Tsp,
        SolutionSpace::Cycles { n, successors },
        FeatureTable::Dense(x),
        flatten_row_major(&centered),
        DMatrix::identity(n * n, n * n),
        ParamSubspace::ZeroRowColSumsZeroDiagonal { n },
        false,
        n as f64 * grand,
    )
}

/// Minimum cost and every index attaining it (ties within `1e-9` relative).
pub fn brute_force_optimum(e: &ProblemEncoding) -> (f64, Vec<usize>) {
    let costs = e.costs();
    let opt = costs.min();
    let tol = 1e-9 * opt.abs().max(1.0);
    let argmin = (0..costs.len()).filter(|&i| costs[i] <= opt + tol).collect();
    (opt, argmin)
}

#[derive(Debug, Clone, Serialize)]
pub struct EncodingReport {
    pub solutions: usize,
    pub n_x: usize,
    pub n_z: usize,
    pub max_feature_norm: f64,
    pub instance_norm: f64,
    pub cost_frobenius: f64,
    pub alpha: f64,
    pub violations: Vec<String>,
}

impl EncodingReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the norm bounds and the positivity of the variance floor.
pub fn validate_encoding(e: &ProblemEncoding) -> EncodingReport {
    let tol = 1e-9;
    let mut violations = Vec::new();
    let max_feature_norm = (0..e.len())
        .map(|r| e.features.row(r).norm())
        .fold(0.0, f64::max);
    let instance_norm = e.instance_features.norm();
    let cost_frobenius = e.cost_matrix.norm();
    if max_feature_norm > e.bounds.d_s * (1.0 + tol) {
        violations.push(format!("feature norm {max_feature_norm} exceeds D_S = {}", e.bounds.d_s));
    }
    if instance_norm > e.bounds.d_i * (1.0 + tol) {
        violations.push(format!("instance norm {instance_norm} exceeds D_I = {}", e.bounds.d_i));
    }
    if cost_frobenius > e.bounds.c * (1.0 + tol) {
        violations.push(format!("‖M‖_F = {cost_frobenius} exceeds C = {}", e.bounds.c));
    }
    let alpha = e.alpha();
    if alpha <= tol {
        violations.push(format!("variance floor α = {alpha} is not positive"));
    }
    EncodingReport {
        solutions: e.len(),
        n_x: e.n_x(),
        n_z: e.n_z(),
        max_feature_norm,
        instance_norm,
        cost_frobenius,
        alpha,
        violations,
    }
}
