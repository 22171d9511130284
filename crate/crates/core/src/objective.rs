//! Exact and score-function losses and gradients of the regularized mixture objective.
//!
//! For one instance with `c = Mᵀz`, `w = Wᵀz` and `a = c + λw`, the gradient in
//! `w` is `(1−β)·Cov_{φ(w)}(x, a·x) + βρ·Cov_{φ(ρw)}(x, a·x)` and the chain rule
//! gives `∇_W = z gᵀ`. Summing over the prior yields the matrix gradient.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::encodings::ProblemEncoding;
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::generator::{gibbs_from_vector, neg_entropy, sample_with, Distribution, MixtureParams};

/// Finite-support prior over instance feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub instances: Vec<(DVector<f64>, f64)>,
}

impl PriorSpec {
    pub fn new(instances: Vec<(DVector<f64>, f64)>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Config("prior needs at least one instance".into()));
        }
        if instances.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::Config("prior weights must be nonnegative".into()));
        }
        let total: f64 = instances.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::Config("prior weights sum to zero".into()));
        }
        let dim = instances[0].0.len();
        if instances.iter().any(|(z, _)| z.len() != dim) {
            return Err(Error::Dimension("prior instances differ in length".into()));
        }
        Ok(Self {
            instances: instances.into_iter().map(|(z, w)| (z, w / total)).collect(),
        })
    }

    /// Point mass on the encoding's own instance.
    pub fn single(e: &ProblemEncoding) -> Self {
        Self {
            instances: vec![(e.instance_features.clone(), 1.0)],
        }
    }
}

/// Exact per-instance quantities for a parameter vector `w`.
#[derive(Debug, Clone)]
pub struct VectorEval {
    pub loss: f64,
    pub regularizer: f64,
    pub reg_loss: f64,
    /// Gradient of the regularized loss with respect to `w`.
    pub grad: DVector<f64>,
    /// `g · (c + λw)`.
    pub correlation_lhs: f64,
    /// `(1−β)·Var_fast[a·x] + βρ·Var_slow[a·x]`.
    pub correlation_rhs: f64,
    pub var_fast: f64,
    pub var_slow: f64,
    pub density: Distribution,
}

/// Exact evaluation of `E_p[c·x] + λ·R` and its gradient in `w`.
pub fn evaluate_vector(
    features: &FeatureTable,
    c: &DVector<f64>,
    w: &DVector<f64>,
    beta: f64,
    rho: f64,
    lambda: f64,
) -> Result<VectorEval> {
    let a = c + w * lambda;
    let cost = features.scores(c);
    let wscore = features.scores(w);
    let ascore = &cost + &wscore * lambda;
    if wscore.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }

    let fast = Distribution::from_log_weights(wscore.clone())?;
    let pf = fast.probs();
    let mean_f = pf.dot(&ascore);
    let centered_f = ascore.add_scalar(-mean_f);
    let var_f = pf.dot(&centered_f.component_mul(&centered_f));
    let mut q = pf.component_mul(&centered_f) * (1.0 - beta);
    let mut loss = (1.0 - beta) * pf.dot(&cost);
    let mut reg = (1.0 - beta) * neg_entropy(&fast);

    let (density, var_s) = if beta > 0.0 {
        let slow = Distribution::from_log_weights(&wscore * rho)?;
        let ps = slow.probs();
        let mean_s = ps.dot(&ascore);
        let centered_s = ascore.add_scalar(-mean_s);
        let var_s = ps.dot(&centered_s.component_mul(&centered_s));
        q += ps.component_mul(&centered_s) * (beta * rho);
        loss += beta * ps.dot(&cost);
        reg += beta / rho * neg_entropy(&slow);
        (Distribution::mix(&fast, &slow, beta), var_s)
    } else {
        (fast, 0.0)
    };

    let grad = features.weighted_sum(&q);
    Ok(VectorEval {
        loss,
        regularizer: reg,
        reg_loss: loss + lambda * reg,
        correlation_lhs: grad.dot(&a),
        correlation_rhs: (1.0 - beta) * var_f + beta * rho * var_s,
        var_fast: var_f,
        var_slow: var_s,
        grad,
        density,
    })
}

/// Prior-averaged exact report for the matrix parameters.
#[derive(Debug, Clone, Serialize)]
pub struct GradReport {
    #[serde(skip)]
    pub gradient: DMatrix<f64>,
    pub gradient_norm: f64,
    pub loss: f64,
    pub reg_loss: f64,
    pub correlation_lhs: f64,
    pub correlation_rhs: f64,
    /// Prior-weighted `(Var_fast, Var_slow)` of `a·x`.
    pub variance_terms: (f64, f64),
    /// Most likely solution under the first prior instance.
    pub argmax: usize,
}

impl GradReport {
    pub fn correlation_rel_error(&self) -> f64 {
        let scale = self.correlation_lhs.abs().max(self.correlation_rhs.abs()).max(1e-300);
        (self.correlation_lhs - self.correlation_rhs).abs() / scale
    }
}

pub fn exact_grad(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp: &MixtureParams,
    lambda: f64,
) -> Result<GradReport> {
    if mp.w.nrows() != e.n_z() || mp.w.ncols() != e.n_x() {
        return Err(Error::Dimension(format!(
            "W is {}x{}, expected {}x{}",
            mp.w.nrows(),
            mp.w.ncols(),
            e.n_z(),
            e.n_x()
        )));
    }
    let mut gradient = DMatrix::zeros(e.n_z(), e.n_x());
    let (mut loss, mut reg_loss, mut lhs, mut rhs, mut vf, mut vs) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut argmax = 0;
    for (k, (z, weight)) in prior.instances.iter().enumerate() {
        if z.len() != e.n_z() {
            return Err(Error::Dimension("prior instance length differs from n_Z".into()));
        }
        let c = e.cost_vector_for(z);
        let w = mp.w.tr_mul(z);
        let ev = evaluate_vector(&e.features, &c, &w, mp.beta, mp.rho, lambda)?;
        gradient += z * ev.grad.transpose() * *weight;
        loss += weight * ev.loss;
        reg_loss += weight * ev.reg_loss;
        lhs += weight * ev.correlation_lhs;
        rhs += weight * ev.correlation_rhs;
        vf += weight * ev.var_fast;
        vs += weight * ev.var_slow;
        if k == 0 {
            argmax = ev.density.argmax();
        }
    }
    Ok(GradReport {
        gradient_norm: gradient.norm(),
        gradient,
        loss,
        reg_loss,
        correlation_lhs: lhs,
        correlation_rhs: rhs,
        variance_terms: (vf, vs),
        argmax,
    })
}

pub fn exact_loss(e: &ProblemEncoding, prior: &PriorSpec, mp: &MixtureParams) -> Result<f64> {
    Ok(exact_grad(e, prior, mp, 0.0)?.loss)
}

pub fn exact_reg_loss(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp: &MixtureParams,
    lambda: f64,
) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::Config("λ must be nonnegative".into()));
    }
    Ok(exact_grad(e, prior, mp, lambda)?.reg_loss)
}

/// Score-function estimate of the cost gradient plus the exact entropy gradient.
///
/// Each draw uses the mean cost of the other draws of its instance as a baseline, which keeps the estimate unbiased.
pub fn policy_grad_estimate(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp: &MixtureParams,
    lambda: f64,
    batch: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    policy_grad_estimate_with(e, prior, mp, lambda, batch, &mut rng)
}

pub fn policy_grad_estimate_with<R: Rng>(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp: &MixtureParams,
    lambda: f64,
    batch: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if batch == 0 {
        return Err(Error::Config("batch must be at least 1".into()));
    }
    let (beta, rho) = (mp.beta, mp.rho);
    let mut grad = DMatrix::zeros(e.n_z(), e.n_x());

    // Draw instance counts first so each instance's tables are built once.
    let weights: Vec<f64> = prior.instances.iter().map(|(_, w)| *w).collect();
    let mut counts = vec![0usize; weights.len()];
    let instance_table = Distribution::from_log_weights(DVector::from_iterator(
        weights.len(),
        weights.iter().map(|w| w.ln()),
    ))?;
    for k in sample_with(&instance_table, rng, batch) {
        counts[k] += 1;
    }

    for ((z, weight), &count) in prior.instances.iter().zip(&counts) {
        let c = e.cost_vector_for(z);
        let w = mp.w.tr_mul(z);
        let cost = e.features.scores(&c);
        let wscore = e.features.scores(&w);
        let fast = gibbs_from_vector(&e.features, &w)?;
        let pf = fast.probs();
        let (slow, ps) = if beta > 0.0 {
            let slow = gibbs_from_vector(&e.features, &(&w * rho))?;
            let ps = slow.probs();
            (Some(slow), ps)
        } else {
            (None, DVector::zeros(pf.len()))
        };
        let mix = match &slow {
            Some(s) => Distribution::mix(&fast, s, beta),
            None => fast.clone(),
        };
        let pm = mix.probs();

        // Every term is linear in the features, so the estimate is `Xᵀq` for one vector `q`.
        let mut q = DVector::zeros(pm.len());

        // Cost part: (cost − leave-one-out baseline)·∇_w log p(x), averaged over the draws.
        if count > 0 {
            let mut tally = vec![0usize; pm.len()];
            for idx in sample_with(&mix, rng, count) {
                tally[idx] += 1;
            }
            let total: f64 = tally.iter().enumerate().map(|(i, &t)| t as f64 * cost[i]).sum();
            let (mut a_fast, mut a_slow) = (0.0, 0.0);
            for (idx, &t) in tally.iter().enumerate() {
                if t == 0 {
                    continue;
                }
                let baseline = if count > 1 {
                    (total - cost[idx]) / (count - 1) as f64
                } else {
                    0.0
                };
                let a = t as f64 * (cost[idx] - baseline) / (batch as f64 * pm[idx]);
                let (uf, us) = ((1.0 - beta) * pf[idx] * a, beta * rho * ps[idx] * a);
                q[idx] += uf + us;
                a_fast += uf;
                a_slow += us;
            }
            q -= &pf * a_fast;
            if beta > 0.0 {
                q -= &ps * a_slow;
            }
        }

        // Entropy part, exact: λ[(1−β)Cov_fast(x, w·x) + βρ·Cov_slow(x, w·x)].
        if lambda > 0.0 {
            let ef = pf.dot(&wscore);
            q += pf.component_mul(&wscore.add_scalar(-ef)) * ((1.0 - beta) * lambda * weight);
            if beta > 0.0 {
                let es = ps.dot(&wscore);
                q += ps.component_mul(&wscore.add_scalar(-es)) * (beta * rho * lambda * weight);
            }
        }
        let g = e.features.weighted_sum(&q);
        grad += z * g.transpose();
    }
    Ok(grad)
}

/// `(‖∇_w L_λ‖, 2·D_S²·‖c+λw‖·((1−β)+βρ))` for one instance.
pub fn grad_norm_bound_check(
    e: &ProblemEncoding,
    z: &DVector<f64>,
    mp: &MixtureParams,
    lambda: f64,
) -> Result<(f64, f64)> {
    let c = e.cost_vector_for(z);
    let w = mp.w.tr_mul(z);
    grad_norm_bound_vector(&e.features, e.bounds.d_s, &c, &w, mp.beta, mp.rho, lambda)
}

pub fn grad_norm_bound_vector(
    features: &FeatureTable,
    d_s: f64,
    c: &DVector<f64>,
    w: &DVector<f64>,
    beta: f64,
    rho: f64,
    lambda: f64,
) -> Result<(f64, f64)> {
    let ev = evaluate_vector(features, c, w, beta, rho, lambda)?;
    let a = c + w * lambda;
    let rhs = 2.0 * d_s * d_s * a.norm() * ((1.0 - beta) + beta * rho);
    Ok((ev.grad.norm(), rhs))
}

/// Empirical gradient Lipschitz constant along random segments in the ball and an a priori bound.
///
/// The bound is `D_I²·[(1−β)(λD_S² + 8D_S³A) + βρ(λD_S² + 8ρD_S³A)]` with `A = D_I(C + λB)`.
pub fn smoothness_probe(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp: &MixtureParams,
    lambda: f64,
    ball_radius: f64,
    segments: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut empirical: f64 = 0.0;
    for _ in 0..segments {
        let a = crate::math::uniform_in_ball(&mut rng, e.n_z(), e.n_x(), ball_radius);
        let b = crate::math::uniform_in_ball(&mut rng, e.n_z(), e.n_x(), ball_radius);
        let dist = (&a - &b).norm();
        if dist < 1e-12 {
            continue;
        }
        let ga = exact_grad(e, prior, &mp.with_w(a), lambda)?.gradient;
        let gb = exact_grad(e, prior, &mp.with_w(b), lambda)?.gradient;
        empirical = empirical.max((ga - gb).norm() / dist);
    }
    let d_i = prior
        .instances
        .iter()
        .map(|(z, _)| z.norm())
        .fold(0.0, f64::max);
    let ds = e.bounds.d_s;
    let amax = d_i * (e.bounds.c + lambda * ball_radius);
    let (beta, rho) = (mp.beta, mp.rho);
    let inner = (1.0 - beta) * (lambda * ds * ds + 8.0 * ds.powi(3) * amax)
        + beta * rho * (lambda * ds * ds + 8.0 * rho * ds.powi(3) * amax);
    Ok((empirical, d_i * d_i * inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::encode_maxcut;
    use crate::instance::{erdos_renyi, Graph};
    use proptest::prelude::*;
    use rand::Rng;

    fn single_edge() -> ProblemEncoding {
        encode_maxcut(&Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap()).unwrap()
    }

    fn random_w(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-scale..scale))
    }

    #[test]
    fn uniform_loss_on_single_edge() {
        let e = single_edge();
        let mp = MixtureParams::zeros(&e, 0.0, 1.0).unwrap();
        assert!((exact_loss(&e, &PriorSpec::single(&e), &mp).unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn reg_loss_at_zero() {
        let e = single_edge();
        let mp = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
        let prior = PriorSpec::single(&e);
        let lambda = 0.7;
        let expect = -2.0 + lambda * (1.0 - 0.2 + 0.2 / 0.03) * -(4f64.ln());
        assert!((exact_reg_loss(&e, &prior, &mp, lambda).unwrap() - expect).abs() < 1e-12);
        let l0 = exact_loss(&e, &prior, &mp).unwrap();
        assert_eq!(exact_reg_loss(&e, &prior, &mp, 0.0).unwrap(), l0);
    }

    #[test]
    fn fully_slow_tiny_rho_gives_uniform_loss() {
        let e = single_edge();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mp = MixtureParams::new(random_w(&mut rng, 4, 4, 5.0), 1.0, 1e-12).unwrap();
        assert!((exact_loss(&e, &PriorSpec::single(&e), &mp).unwrap() + 2.0).abs() < 1e-9);
    }

    #[test]
    fn correlation_vanishes_at_regularized_minimizer() {
        let e = single_edge();
        let lambda = 0.3;
        let w = -&e.cost_matrix / lambda;
        let mp = MixtureParams::new(w.clone(), 0.2, 0.03).unwrap();
        let rep = exact_grad(&e, &PriorSpec::single(&e), &mp, lambda).unwrap();
        assert!(rep.correlation_lhs.abs() < 1e-12);
        assert!(rep.gradient.dot(&(w + &e.cost_matrix / lambda)).abs() < 1e-12);
        assert!(rep.gradient_norm < 1e-12);
    }

    #[test]
    fn policy_gradient_converges_to_exact() {
        let e = single_edge();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mp = MixtureParams::new(random_w(&mut rng, 4, 4, 0.3), 0.2, 0.03).unwrap();
        let prior = PriorSpec::single(&e);
        let exact = exact_grad(&e, &prior, &mp, 0.5).unwrap().gradient;
        let est = policy_grad_estimate(&e, &prior, &mp, 0.5, 100_000, 5).unwrap();
        assert!((&est - &exact).norm() <= 0.05 * exact.norm());
        let again = policy_grad_estimate(&e, &prior, &mp, 0.5, 100_000, 5).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn point_mass_policy_gradient_is_exact() {
        // The path 0-1-2 has a unique optimal cut feature.
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let e = encode_maxcut(&g).unwrap().collapse_instance();
        // Huge parameters make the fast branch a point mass up to rounding.
        let w = DMatrix::from_row_slice(1, 9, &(-e.cost_vector() * 1e3).as_slice().to_vec());
        let mp = MixtureParams::vanilla(w);
        let prior = PriorSpec::single(&e);
        let est = policy_grad_estimate(&e, &prior, &mp, 0.0, 50, 1).unwrap();
        let exact = exact_grad(&e, &prior, &mp, 0.0).unwrap().gradient;
        assert!((&est - &exact).norm() < 1e-10);
    }

    #[test]
    fn gradient_bound_examples() {
        let e = encode_maxcut(&erdos_renyi(4, 0.6, 2).unwrap()).unwrap();
        let z = e.instance_features.clone();
        let lambda = 0.5;
        let mp = MixtureParams::new(-&e.cost_matrix / lambda, 0.2, 0.03).unwrap();
        let (lhs, rhs) = grad_norm_bound_check(&e, &z, &mp, lambda).unwrap();
        assert!(lhs < 1e-10 && rhs < 1e-10);

        let zero = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
        let (l1, r1) = grad_norm_bound_check(&e, &z, &zero, lambda).unwrap();
        let (l2, r2) = grad_norm_bound_check(&e, &(&z * 2.0), &zero, lambda).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-10 * l1.max(1.0));
        assert!((r2 - 2.0 * r1).abs() < 1e-10 * r1.max(1.0));
    }

    #[test]
    fn vanilla_correlation_is_cost_variance() {
        let e = encode_maxcut(&erdos_renyi(4, 0.6, 9).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mp = MixtureParams::vanilla(random_w(&mut rng, 16, 16, 0.2));
        let rep = exact_grad(&e, &PriorSpec::single(&e), &mp, 0.0).unwrap();
        let corr = rep.gradient.dot(&e.cost_matrix);
        let d = crate::generator::gibbs_density(&e, &mp.w).unwrap();
        let var = crate::math::variance(&d.probs(), &e.costs());
        assert!((corr - var).abs() < 1e-9 * var.max(1.0));
    }

    #[test]
    fn smoothness_probe_within_bound() {
        let e = encode_maxcut(&erdos_renyi(3, 1.0, 0).unwrap()).unwrap().collapse_instance();
        let mp = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
        let (emp, bound) =
            smoothness_probe(&e, &PriorSpec::single(&e), &mp, 0.5, 2.0, 10, 4).unwrap();
        assert!(emp <= bound);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = single_edge();
            let mp = MixtureParams::new(random_w(&mut rng, 4, 4, 1.0), 0.2, 0.03).unwrap();
            let lambda = rng.gen_range(0.0..2.0);
            let prior = PriorSpec::single(&e);
            let g = exact_grad(&e, &prior, &mp, lambda).unwrap().gradient;
            let h = 1e-5;
            let mut fd = DMatrix::zeros(4, 4);
            for i in 0..4 {
                for j in 0..4 {
                    let mut plus = mp.w.clone();
                    plus[(i, j)] += h;
                    let mut minus = mp.w.clone();
                    minus[(i, j)] -= h;
                    let lp = exact_reg_loss(&e, &prior, &mp.with_w(plus), lambda).unwrap();
                    let lm = exact_reg_loss(&e, &prior, &mp.with_w(minus), lambda).unwrap();
                    fd[(i, j)] = (lp - lm) / (2.0 * h);
                }
            }
            prop_assert!((&g - &fd).norm() <= 1e-6 * g.norm() + 1e-9);
        }

        #[test]
        fn correlation_identity(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = encode_maxcut(&erdos_renyi(4, 0.5, seed).unwrap()).unwrap();
            let mp = MixtureParams::new(random_w(&mut rng, 16, 16, 0.5), 0.2, 0.03).unwrap();
            let rep = exact_grad(&e, &PriorSpec::single(&e), &mp, rng.gen_range(0.0..1.0)).unwrap();
            prop_assert!(rep.correlation_rhs >= 0.0);
            prop_assert!((rep.correlation_lhs - rep.correlation_rhs).abs()
                <= 1e-8 * rep.correlation_rhs.abs().max(1e-12));
        }
    }
}
