//! Exact Gibbs densities and fast/slow mixtures over enumerated solutions.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::ProblemEncoding;
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::math::{log_softmax, log_sum_exp, mean, variance};

pub const BETA_STAR: f64 = 0.2;
pub const RHO_STAR: f64 = 0.03;

/// Parameters of `(1−β)·φ(W) + β·φ(ρW)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub w: DMatrix<f64>,
    pub beta: f64,
    pub rho: f64,
}

impl MixtureParams {
    pub fn new(w: DMatrix<f64>, beta: f64, rho: f64) -> Result<Self> {
        let mp = Self { w, beta, rho };
        mp.validate()?;
        Ok(mp)
    }

    /// Zero parameters sized for an encoding.
    pub fn zeros(e: &ProblemEncoding, beta: f64, rho: f64) -> Result<Self> {
        Self::new(DMatrix::zeros(e.n_z(), e.n_x()), beta, rho)
    }

    /// Single Gibbs density (`β = 0`).
    pub fn vanilla(w: DMatrix<f64>) -> Self {
        Self { w, beta: 0.0, rho: 1.0 }
    }

    pub fn with_w(&self, w: DMatrix<f64>) -> Self {
        Self { w, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("mixture weight {} outside [0,1]", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("inverse temperature {} outside [0,1]", self.rho)));
        }
        if self.w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("parameter matrix".into()));
        }
        Ok(())
    }
}

/// Probability table over enumerated solutions, stored as log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    log_probs: DVector<f64>,
}

impl Distribution {
    /// Normalize arbitrary log-weights.
    pub fn from_log_weights(log_weights: DVector<f64>) -> Result<Self> {
        if log_weights.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::NonFinite("density scores".into()));
        }
        Ok(Self {
            log_probs: log_softmax(&log_weights),
        })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            log_probs: DVector::from_element(m, -(m as f64).ln()),
        }
    }

    pub fn point_mass(m: usize, index: usize) -> Self {
        let mut lp = DVector::from_element(m, f64::NEG_INFINITY);
        lp[index] = 0.0;
        Self { log_probs: lp }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &DVector<f64> {
        &self.log_probs
    }

    pub fn probs(&self) -> DVector<f64> {
        self.log_probs.map(f64::exp)
    }

    /// `(1−β)·a + β·b`, computed in log space.
    pub fn mix(a: &Distribution, b: &Distribution, beta: f64) -> Distribution {
        if beta <= 0.0 {
            return a.clone();
        }
        if beta >= 1.0 {
            return b.clone();
        }
        let (la, lb) = ((1.0 - beta).ln(), beta.ln());
        let lp = DVector::from_fn(a.len(), |i, _| {
            log_sum_exp(&[la + a.log_probs[i], lb + b.log_probs[i]])
        });
        Distribution { log_probs: lp }
    }

    /// Index of the most likely solution.
    pub fn argmax(&self) -> usize {
        crate::math::argmax(&self.log_probs)
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * (self.probs() - other.probs()).abs().sum()
    }

    pub fn expectation(&self, values: &DVector<f64>) -> f64 {
        mean(&self.probs(), values)
    }

    /// Write `index,label,prob` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W, label: impl Fn(usize) -> String) -> Result<()> {
        writeln!(out, "index,label,prob")?;
        for (i, lp) in self.log_probs.iter().enumerate() {
            writeln!(out, "{i},{},{:.17e}", label(i), lp.exp())?;
        }
        Ok(())
    }
}

/// Gibbs density `∝ exp(w · x)` for a parameter vector over features.
pub fn gibbs_from_vector(features: &FeatureTable, w: &DVector<f64>) -> Result<Distribution> {
    Distribution::from_log_weights(features.scores(w))
}

/// Gibbs density `∝ exp(zᵀ W x)` for the encoding's instance.
pub fn gibbs_density(e: &ProblemEncoding, w: &DMatrix<f64>) -> Result<Distribution> {
    check_dims(e, w)?;
    gibbs_from_vector(&e.features, &w.tr_mul(&e.instance_features))
}

/// Mixture density for a parameter vector `w = Wᵀ z`.
pub fn mixture_from_vector(
    features: &FeatureTable,
    w: &DVector<f64>,
    beta: f64,
    rho: f64,
) -> Result<Distribution> {
    let fast = gibbs_from_vector(features, w)?;
    if beta <= 0.0 {
        return Ok(fast);
    }
    let slow = gibbs_from_vector(features, &(w * rho))?;
    Ok(Distribution::mix(&fast, &slow, beta))
}

pub fn mixture_density(e: &ProblemEncoding, mp: &MixtureParams) -> Result<Distribution> {
    check_dims(e, &mp.w)?;
    mixture_from_vector(&e.features, &mp.w.tr_mul(&e.instance_features), mp.beta, mp.rho)
}

fn check_dims(e: &ProblemEncoding, w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != e.n_z() || w.ncols() != e.n_x() {
        return Err(Error::Dimension(format!(
            "W is {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            e.n_z(),
            e.n_x()
        )));
    }
    Ok(())
}

/// I.i.d. draws by inverse CDF over the table.
pub fn sample(d: &Distribution, seed: u64, count: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(d, &mut rng, count)
}

pub fn sample_with<R: Rng>(d: &Distribution, rng: &mut R, count: usize) -> Vec<usize> {
    let probs = d.probs();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs.iter() {
        acc += p;
        cdf.push(acc);
    }
    let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    (0..count)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last_positive)
        })
        .collect()
}

/// `Σ p log p` with `0 log 0 = 0`.
pub fn neg_entropy(d: &Distribution) -> f64 {
    d.log_probs
        .iter()
        .filter(|lp| lp.is_finite())
        .map(|&lp| lp.exp() * lp)
        .sum()
}

/// `(1−β)·H(φ(W)) + (β/ρ)·H(φ(ρW))` for the encoding's instance.
pub fn regularizer(e: &ProblemEncoding, mp: &MixtureParams) -> Result<f64> {
    check_dims(e, &mp.w)?;
    let w = mp.w.tr_mul(&e.instance_features);
    regularizer_from_vector(&e.features, &w, mp.beta, mp.rho)
}

pub fn regularizer_from_vector(
    features: &FeatureTable,
    w: &DVector<f64>,
    beta: f64,
    rho: f64,
) -> Result<f64> {
    let mut r = (1.0 - beta) * neg_entropy(&gibbs_from_vector(features, w)?);
    if beta > 0.0 {
        r += beta / rho * neg_entropy(&gibbs_from_vector(features, &(w * rho))?);
    }
    Ok(r)
}

/// `Var_{x∼d}[v · x]`.
pub fn linear_variance(d: &Distribution, features: &FeatureTable, v: &DVector<f64>) -> f64 {
    variance(&d.probs(), &features.scores(v))
}

/// `Var_{x∼φ(ρW)}[c · x]` for each `ρ` in the grid.
pub fn almost_uniform_scan(
    e: &ProblemEncoding,
    w: &DMatrix<f64>,
    c: &DVector<f64>,
    rho_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_dims(e, w)?;
    let wv = w.tr_mul(&e.instance_features);
    let cost_scores = e.features.scores(c);
    rho_grid
        .iter()
        .map(|&rho| {
            let d = gibbs_from_vector(&e.features, &(&wv * rho))?;
            Ok((rho, variance(&d.probs(), &cost_scores)))
        })
        .collect()
}

/// Inverse temperature `C₀·α/(B·D³)` at which the slow branch keeps a constant fraction of the uniform variance.
pub fn almost_uniform_rho(alpha: f64, ball_radius: f64, diameter: f64, c0: f64) -> f64 {
    c0 * alpha / (ball_radius * diameter.powi(3))
}

/// Quantities of the moment-gap variance bound for a distribution `mu` against uniform.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentGap {
    pub var_mu: f64,
    pub var_uniform: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// `3·max(ε₁², ε₁·D, ε₂)·‖w‖²`.
    pub allowed_gap: f64,
}

impl MomentGap {
    pub fn holds(&self) -> bool {
        self.var_mu >= self.var_uniform - self.allowed_gap - 1e-12 * self.var_uniform.abs().max(1.0)
    }
}

/// First-moment gap `ε₁ = ‖E_U x − E_μ x‖` and the direction-`w` second-moment gap `ε₂`.
pub fn moment_gap(mu: &Distribution, features: &FeatureTable, w: &DVector<f64>) -> MomentGap {
    let m = features.len();
    let p = mu.probs();
    let u = DVector::from_element(m, 1.0 / m as f64);
    let eps1 = (features.weighted_sum(&u) - features.weighted_sum(&p)).norm();
    let s = features.scores(w);
    let second = |q: &DVector<f64>| q.iter().zip(s.iter()).map(|(qi, si)| qi * si * si).sum::<f64>();
    let w2 = w.norm_squared();
    let eps2 = if w2 > 0.0 {
        ((second(&u) - second(&p)) / w2).max(0.0)
    } else {
        0.0
    };
    let d = features.max_norm();
    MomentGap {
        var_mu: variance(&p, &s),
        var_uniform: variance(&u, &s),
        eps1,
        eps2,
        allowed_gap: 3.0 * (eps1 * eps1).max(eps1 * d).max(eps2) * w2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{encode_maxcut, ProblemEncoding};
    use crate::instance::{erdos_renyi, Graph};
    use proptest::prelude::*;
    use rand::Rng;

    fn fig1() -> ProblemEncoding {
        ProblemEncoding::from_points(
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 2.0, 0.0, 2.0]),
            DVector::from_vec(vec![-3.0, -3.0]),
        )
        .unwrap()
    }

    fn single_edge() -> ProblemEncoding {
        encode_maxcut(&Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap()).unwrap()
    }

    #[test]
    fn zero_parameters_give_uniform() {
        let e = single_edge();
        let d = gibbs_density(&e, &DMatrix::zeros(4, 4)).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn figure_domain_concentrates() {
        let e = fig1();
        let w = DMatrix::from_row_slice(1, 2, &[20.0, 20.0]);
        let d = gibbs_density(&e, &w).unwrap();
        assert!(d.probs()[1] >= 1.0 - 1e-8);
    }

    #[test]
    fn single_edge_optimum_parameters_concentrate_on_cuts() {
        let e = single_edge();
        let w = -&e.cost_matrix / 0.05;
        let d = gibbs_density(&e, &w).unwrap();
        let p = d.probs();
        assert!(p[1] + p[2] >= 0.99);
    }

    #[test]
    fn mixture_endpoints() {
        let e = single_edge();
        let w = DMatrix::from_fn(4, 4, |i, j| (i as f64 - j as f64) * 0.1 + 0.05 * i as f64);
        let fast = gibbs_density(&e, &w).unwrap();
        let slow = gibbs_density(&e, &(&w * 0.03)).unwrap();
        let m0 = mixture_density(&e, &MixtureParams::new(w.clone(), 0.0, 0.03).unwrap()).unwrap();
        let m1 = mixture_density(&e, &MixtureParams::new(w.clone(), 1.0, 0.03).unwrap()).unwrap();
        assert!((m0.probs() - fast.probs()).amax() < 1e-15);
        assert!((m1.probs() - slow.probs()).amax() < 1e-15);
    }

    #[test]
    fn slow_branch_is_near_uniform_for_large_parameters() {
        let g = erdos_renyi(5, 0.5, 1).unwrap();
        let e = encode_maxcut(&g).unwrap();
        let w = -&e.cost_matrix * 0.5;
        let slow = gibbs_density(&e, &(&w * RHO_STAR)).unwrap();
        assert!(slow.total_variation(&Distribution::uniform(e.len())) < 0.05);
    }

    #[test]
    fn sampling() {
        let d = Distribution::point_mass(5, 3);
        assert!(sample(&d, 1, 100).iter().all(|&i| i == 3));
        let u = Distribution::uniform(2);
        let draws = sample(&u, 7, 100_000);
        let freq = draws.iter().filter(|&&i| i == 0).count() as f64 / 1e5;
        assert!((freq - 0.5).abs() < 0.01);
        assert_eq!(sample(&u, 7, 50), sample(&u, 7, 50));
    }

    #[test]
    fn entropies() {
        assert!((neg_entropy(&Distribution::uniform(8)) + 8f64.ln()).abs() < 1e-14);
        assert_eq!(neg_entropy(&Distribution::point_mass(8, 2)), 0.0);
        assert!((neg_entropy(&Distribution::uniform(2)) + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn regularizer_at_zero() {
        let e = single_edge();
        let mp = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
        let r = regularizer(&e, &mp).unwrap();
        let expect = (1.0 - 0.2 + 0.2 / 0.03) * -(4f64.ln());
        assert!((r - expect).abs() < 1e-12);
    }

    #[test]
    fn linear_variance_examples() {
        let e = encode_maxcut(&Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap()).unwrap();
        let v = DVector::from_vec(vec![0.0, 1.5, -0.5, 0.0]);
        assert_eq!(linear_variance(&Distribution::point_mass(4, 1), &e.features, &v), 0.0);
        // Off-diagonal pair contributes coefficient (1.5 − 0.5) on s₀s₁.
        let var = linear_variance(&Distribution::uniform(4), &e.features, &v);
        assert!((var - 1.0).abs() < 1e-14);
        assert_eq!(linear_variance(&Distribution::uniform(4), &e.features, &DVector::zeros(4)), 0.0);
    }

    #[test]
    fn almost_uniform_scan_at_zero_is_uniform_variance() {
        let g = erdos_renyi(4, 0.7, 5).unwrap();
        let e = encode_maxcut(&g).unwrap();
        let c = e.cost_vector();
        let w = -&e.cost_matrix * 10.0;
        let table = almost_uniform_scan(&e, &w, &c, &[0.0, 1.0]).unwrap();
        let uni = linear_variance(&Distribution::uniform(e.len()), &e.features, &c);
        assert_eq!(table[0].1, uni);
        assert!(table[1].1 < 1e-6 * c.norm_squared());
    }

    proptest! {
        #[test]
        fn normalization_and_shift_invariance(seed in 0u64..1000, shift in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(9, 3, |_, _| rng.gen_range(-2.0..2.0));
            let w = DVector::from_fn(3, |_, _| rng.gen_range(-20.0..20.0));
            let table = FeatureTable::Dense(x);
            let d = gibbs_from_vector(&table, &w).unwrap();
            prop_assert!((d.probs().sum() - 1.0).abs() < 1e-12);
            let shifted = Distribution::from_log_weights(table.scores(&w).add_scalar(shift)).unwrap();
            prop_assert!((shifted.probs() - d.probs()).amax() < 1e-12);
        }

        #[test]
        fn mixture_is_within_beta_of_fast(seed in 0u64..1000, beta in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(8, 3, |_, _| rng.gen_range(-2.0..2.0));
            let w = DVector::from_fn(3, |_, _| rng.gen_range(-5.0..5.0));
            let table = FeatureTable::Dense(x);
            let fast = gibbs_from_vector(&table, &w).unwrap();
            let mix = mixture_from_vector(&table, &w, beta, 0.03).unwrap();
            prop_assert!(mix.total_variation(&fast) <= beta + 1e-12);
            prop_assert!((mix.probs().sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn moment_gap_bound_holds(seed in 0u64..1000, scale in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(10, 3, |_, _| rng.gen_range(-1.0..1.0));
            let table = FeatureTable::Dense(x);
            let theta = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0) * scale);
            let w = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let mu = gibbs_from_vector(&table, &theta).unwrap();
            prop_assert!(moment_gap(&mu, &table, &w).holds());
        }
    }
}
