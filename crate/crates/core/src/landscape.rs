//! Bad stationary points, vanishing gradients and two-dimensional objective grids.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::ProblemEncoding;
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::generator::MixtureParams;
use crate::instance::Graph;
use crate::objective::{evaluate_vector, exact_grad, PriorSpec};

pub const DEFAULT_CUBE_EPS: f64 = 0.01;

/// Laplacian with its diagonal zeroed, i.e. `−A`.
fn zero_diag_laplacian(g: &Graph) -> DMatrix<f64> {
    -g.weights().clone()
}

/// Value `−mᵀ L̄ m` and gradient `−4 L̄ m` of the product-distribution loss, `m = 2p − 1`.
///
/// The exact expected cost `E[−sᵀ L s]` equals `value − trace(L)`.
pub fn product_landscape(g: &Graph, p: &DVector<f64>, eps: f64) -> Result<(f64, DVector<f64>)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Config(format!("cube margin {eps} outside (0, 1/2)")));
    }
    if p.len() != g.n() {
        return Err(Error::Dimension(format!("p has length {}, graph has {} nodes", p.len(), g.n())));
    }
    let tol = 1e-12;
    if p.iter().any(|&x| !(x >= eps - tol && x <= 1.0 - eps + tol)) {
        return Err(Error::Config(format!("p outside the cube [{eps}, {}]^n", 1.0 - eps)));
    }
    Ok(product_landscape_unchecked(g, p))
}

fn product_landscape_unchecked(g: &Graph, p: &DVector<f64>) -> (f64, DVector<f64>) {
    let lbar = zero_diag_laplacian(g);
    let m = p.map(|x| 2.0 * x - 1.0);
    let lm = &lbar * &m;
    (-m.dot(&lm), lm * -4.0)
}

/// A sub-optimal strict local maximum of the cut, seen as a product-distribution vertex.
#[derive(Debug, Clone, Serialize)]
pub struct BadVertex {
    pub signs: Vec<i8>,
    /// The vertex pulled into the cube: `p_i = 1−ε` for `s_i = +1`, `ε` otherwise.
    pub p_star: Vec<f64>,
    pub cut: f64,
    pub maxcut: f64,
    /// `(∇L·e_i)·(2p−1)_i` for every node; all negative.
    pub condition: Vec<f64>,
}

/// Cut change from flipping node `i`: `s_i (A s)_i`.
fn flip_gain(g: &Graph, s: &[i8], i: usize) -> f64 {
    let row: f64 = (0..g.n()).map(|j| g.weight(i, j) * s[j] as f64).sum();
    s[i] as f64 * row
}

/// Check every condition a bad vertex must satisfy; returns the per-node sign terms.
pub fn verify_bad_vertex(g: &Graph, signs: &[i8], eps: f64) -> Option<BadVertex> {
    let n = g.n();
    if (0..n).any(|i| flip_gain(g, signs, i) >= 0.0) {
        return None;
    }
    let cut = g.cut_value(signs);
    let maxcut = g.max_cut_brute_force();
    if cut >= maxcut {
        return None;
    }
    let p_star: Vec<f64> = signs
        .iter()
        .map(|&s| if s > 0 { 1.0 - eps } else { eps })
        .collect();
    let p = DVector::from_vec(p_star.clone());
    let (_, grad) = product_landscape(g, &p, eps).ok()?;
    let condition: Vec<f64> = (0..n).map(|i| grad[i] * (2.0 * p[i] - 1.0)).collect();
    if condition.iter().any(|&c| c >= 0.0) {
        return None;
    }
    Some(BadVertex {
        signs: signs.to_vec(),
        p_star,
        cut,
        maxcut,
        condition,
    })
}

/// Random-restart steepest ascent on the cut; returns the first verified sub-optimal strict local max.
pub fn find_bad_vertex(g: &Graph, restarts: usize, seed: u64) -> Option<BadVertex> {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let mut s: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        loop {
            let (best, gain) = (0..n)
                .map(|i| (i, flip_gain(g, &s, i)))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            if gain <= 0.0 {
                break;
            }
            s[best] = -s[best];
        }
        if let Some(v) = verify_bad_vertex(g, &s, DEFAULT_CUBE_EPS) {
            return Some(v);
        }
    }
    None
}

/// Every sub-optimal strict local maximum of the cut, by exhaustive enumeration.
pub fn all_bad_vertices(g: &Graph) -> Vec<Vec<i8>> {
    let n = g.n();
    (0..1usize << n)
        .map(|idx| crate::features::SolutionSpace::signs(n, idx))
        .filter(|s| verify_bad_vertex(g, s, DEFAULT_CUBE_EPS).is_some())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridObjective {
    Vanilla,
    Entropy,
    EntropyMixture,
}

impl GridObjective {
    pub fn name(&self) -> &'static str {
        match self {
            GridObjective::Vanilla => "vanilla",
            GridObjective::Entropy => "entropy",
            GridObjective::EntropyMixture => "entropy_mixture",
        }
    }
}

/// Axis-aligned grid over a two-dimensional parameter slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: (usize, usize),
    pub objective: GridObjective,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::Config("grid resolution must be at least 2 per axis".into()));
        }
        if !(self.x_range.1 > self.x_range.0 && self.y_range.1 > self.y_range.0) {
            return Err(Error::Config("grid ranges must be increasing".into()));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_range, self.resolution.0)
    }

    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y_range, self.resolution.1)
    }
}

fn linspace((lo, hi): (f64, f64), k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub objective: GridObjective,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[(iy, ix)]`.
    #[serde(skip)]
    pub values: DMatrix<f64>,
    #[serde(skip)]
    pub grad_norms: DMatrix<f64>,
    /// `(iy, ix)` of the smallest value.
    pub argmin: (usize, usize),
    pub interior: bool,
}

impl GridResult {
    /// Smallest gradient norm over cells farther than `radius` from the argmin cell's point.
    pub fn min_grad_norm_outside(&self, radius: f64) -> f64 {
        let (ay, ax) = self.argmin;
        let (cx, cy) = (self.xs[ax], self.ys[ay]);
        let mut best = f64::INFINITY;
        for (iy, &y) in self.ys.iter().enumerate() {
            for (ix, &x) in self.xs.iter().enumerate() {
                if ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() > radius {
                    best = best.min(self.grad_norms[(iy, ix)]);
                }
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("y\\x");
        for x in &self.xs {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
        for (iy, y) in self.ys.iter().enumerate() {
            out.push_str(&y.to_string());
            for ix in 0..self.xs.len() {
                out.push_str(&format!(",{:.12e}", self.values[(iy, ix)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate the selected objective of `w ↦ E[c·x] (+ λ R)` on a grid of `w ∈ R²`.
pub fn grid_eval(
    domain: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    beta: f64,
    rho: f64,
    spec: &GridSpec,
) -> Result<GridResult> {
    spec.validate()?;
    if domain.ncols() != 2 || c.len() != 2 {
        return Err(Error::Dimension("grid slices need two-dimensional features".into()));
    }
    let table = FeatureTable::Dense(domain.clone());
    let (lam, b) = match spec.objective {
        GridObjective::Vanilla => (0.0, 0.0),
        GridObjective::Entropy => (lambda, 0.0),
        GridObjective::EntropyMixture => (lambda, beta),
    };
    let (xs, ys) = (spec.xs(), spec.ys());
    let mut values = DMatrix::zeros(ys.len(), xs.len());
    let mut grad_norms = DMatrix::zeros(ys.len(), xs.len());
    // Excess over the best cost keeps saturated vanilla cells distinguishable.
    let mut excess = DMatrix::zeros(ys.len(), xs.len());
    let costs = domain * c;
    let c_min = costs.min();
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let w = DVector::from_vec(vec![x, y]);
            let ev = evaluate_vector(&table, c, &w, b, rho, lam)?;
            values[(iy, ix)] = ev.reg_loss;
            grad_norms[(iy, ix)] = ev.grad.norm();
            let gap: f64 = ev.density.probs().iter().zip(costs.iter()).map(|(p, v)| p * (v - c_min)).sum();
            excess[(iy, ix)] = gap + lam * ev.regularizer;
        }
    }
    let mut argmin = (0, 0);
    for iy in 0..ys.len() {
        for ix in 0..xs.len() {
            if excess[(iy, ix)] < excess[argmin] {
                argmin = (iy, ix);
            }
        }
    }
    let interior =
        argmin.0 > 0 && argmin.0 + 1 < ys.len() && argmin.1 > 0 && argmin.1 + 1 < xs.len();
    Ok(GridResult {
        objective: spec.objective,
        xs,
        ys,
        values,
        grad_norms,
        argmin,
        interior,
    })
}

/// The three-point domain `{(1,0), (2,2), (0,2)}` with cost `c = (−3, −3)`.
pub fn figure_domain() -> (DMatrix<f64>, DVector<f64>) {
    (
        DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 2.0, 0.0, 2.0]),
        DVector::from_vec(vec![-3.0, -3.0]),
    )
}

/// Gradient Frobenius norm at `W = τ·direction` for each scale `τ`.
pub fn vanishing_gradient_scan(
    e: &ProblemEncoding,
    direction: &DMatrix<f64>,
    scales: &[f64],
    lambda: f64,
    beta: f64,
    rho: f64,
) -> Result<Vec<(f64, f64)>> {
    if direction.norm() == 0.0 {
        return Err(Error::Config("scan direction must be nonzero".into()));
    }
    let prior = PriorSpec::single(e);
    scales
        .iter()
        .map(|&tau| {
            let mp = MixtureParams {
                w: direction * tau,
                beta,
                rho,
            };
            Ok((tau, exact_grad(e, &prior, &mp, lambda)?.gradient_norm))
        })
        .collect()
}
