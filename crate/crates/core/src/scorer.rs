//! Three-layer ReLU score network `n → 30 → 10 → 1` with a fast/slow temperature branch.
//!
//! The warm branch multiplies every layer by `ρ`. Because ReLU is positively
//! homogeneous and the layers carry no bias, the warm score equals `ρ³` times the
//! cold score, so training runs a single forward/backward pass per step.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{neg_entropy, Distribution};
use crate::instance::Graph;
use crate::optimizer::{LambdaSchedule, StepRule, Stepper};

pub const HIDDEN1: usize = 30;
pub const HIDDEN2: usize = 10;

/// Uniform fan-in initialization bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `1/√fan_in`, the default of `kaiming_uniform_(a=√5)`.
    TorchDefault,
    /// `√(6/fan_in)`.
    HeUniform,
}

impl InitScheme {
    pub fn bound(&self, fan_in: usize) -> f64 {
        match self {
            InitScheme::TorchDefault => 1.0 / (fan_in as f64).sqrt(),
            InitScheme::HeUniform => (6.0 / fan_in as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MLPParams {
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub l3: DMatrix<f64>,
    pub rho: f64,
}

#[derive(Serialize, Deserialize)]
struct MlpJson {
    shapes: Vec<(usize, usize)>,
    rho: f64,
    weights: Vec<f64>,
}

impl MLPParams {
    pub fn zeros(n: usize, rho: f64) -> Self {
        Self {
            l1: DMatrix::zeros(HIDDEN1, n),
            l2: DMatrix::zeros(HIDDEN2, HIDDEN1),
            l3: DMatrix::zeros(1, HIDDEN2),
            rho,
        }
    }

    pub fn init(n: usize, rho: f64, seed: u64, scheme: InitScheme) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |rows: usize, cols: usize| {
            let b = scheme.bound(cols);
            DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-b..=b))
        };
        let l1 = layer(HIDDEN1, n);
        let l2 = layer(HIDDEN2, HIDDEN1);
        let l3 = layer(1, HIDDEN2);
        Self { l1, l2, l3, rho }
    }

    pub fn n(&self) -> usize {
        self.l1.ncols()
    }

    /// Every layer multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            l1: &self.l1 * t,
            l2: &self.l2 * t,
            l3: &self.l3 * t,
            rho: self.rho,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.l1.norm_squared() + self.l2.norm_squared() + self.l3.norm_squared()).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        let weights = [&self.l1, &self.l2, &self.l3]
            .iter()
            .flat_map(|m| crate::math::flatten_row_major(m).data.as_vec().clone())
            .collect();
        Ok(serde_json::to_string(&MlpJson {
            shapes: vec![self.l1.shape(), self.l2.shape(), self.l3.shape()],
            rho: self.rho,
            weights,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: MlpJson = serde_json::from_str(text)?;
        if j.shapes.len() != 3 {
            return Err(Error::Config("expected three layer shapes".into()));
        }
        let n = j.shapes[0].1;
        let expect = [(HIDDEN1, n), (HIDDEN2, HIDDEN1), (1, HIDDEN2)];
        if j.shapes[..] != expect[..] {
            return Err(Error::Dimension(format!("layer shapes {:?}, expected {:?}", j.shapes, expect)));
        }
        let total: usize = expect.iter().map(|(r, c)| r * c).sum();
        if j.weights.len() != total {
            return Err(Error::Dimension(format!("{} weights, expected {total}", j.weights.len())));
        }
        let mut offset = 0;
        let mut take = |(r, c): (usize, usize)| {
            let m = DMatrix::from_row_slice(r, c, &j.weights[offset..offset + r * c]);
            offset += r * c;
            m
        };
        Ok(Self {
            l1: take(expect[0]),
            l2: take(expect[1]),
            l3: take(expect[2]),
            rho: j.rho,
        })
    }
}

fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|x| x.max(0.0))
}

/// Score of one sign vector; the warm branch scales every layer by `ρ`.
pub fn mlp_score(p: &MLPParams, s: &[i8], cold: bool) -> f64 {
    let t = if cold { 1.0 } else { p.rho };
    let x = DVector::from_iterator(s.len(), s.iter().map(|&v| v as f64));
    let h1 = (&p.l1 * t * x).map(|v| v.max(0.0));
    let h2 = (&p.l2 * t * h1).map(|v| v.max(0.0));
    (&p.l3 * t * h2)[0]
}

/// Sign rows of `{±1}^n` in hypercube index order.
pub fn hypercube_signs(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(1usize << n, n, |r, i| if (r >> i) & 1 == 1 { -1.0 } else { 1.0 })
}

struct Forward {
    h1: DMatrix<f64>,
    h2: DMatrix<f64>,
    out: DVector<f64>,
}

fn forward(p: &MLPParams, signs: &DMatrix<f64>) -> Forward {
    let h1 = relu(&(signs * p.l1.transpose()));
    let h2 = relu(&(&h1 * p.l2.transpose()));
    let out = (&h2 * p.l3.transpose()).column(0).into_owned();
    Forward { h1, h2, out }
}

/// Cold scores of every row of `signs`.
pub fn mlp_scores(p: &MLPParams, signs: &DMatrix<f64>) -> DVector<f64> {
    forward(p, signs).out
}

fn cap_check(n: usize) -> Result<()> {
    let cap = crate::encodings::DEFAULT_ENUMERATION_CAP;
    if n >= 63 || (1usize << n) > cap {
        return Err(Error::EnumerationCap {
            size: 1u128 << n.min(127),
            cap,
        });
    }
    Ok(())
}

/// `(1−β)·softmax(cold) + β·softmax(warm)` over all of `{±1}^n`.
pub fn mlp_density(p: &MLPParams, n: usize, beta: f64) -> Result<Distribution> {
    cap_check(n)?;
    if p.n() != n {
        return Err(Error::Dimension(format!("network input {} but n = {n}", p.n())));
    }
    let f = mlp_scores(p, &hypercube_signs(n));
    let cold = Distribution::from_log_weights(f.clone())?;
    let warm = Distribution::from_log_weights(f * p.rho.powi(3))?;
    Ok(Distribution::mix(&cold, &warm, beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub l3: DMatrix<f64>,
}

impl MlpGrad {
    pub fn norm(&self) -> f64 {
        (self.l1.norm_squared() + self.l2.norm_squared() + self.l3.norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct MlpEval {
    /// `E_p[−sᵀ L s]`.
    pub loss: f64,
    /// `(1−β)·H_cold + (β/ρ)·H_warm`.
    pub regularizer: f64,
    pub reg_loss: f64,
    pub grad: MlpGrad,
    pub density: Distribution,
}

/// Precomputed sign table and costs `−sᵀ L s` of a Max-Cut instance.
#[derive(Debug, Clone)]
pub struct MlpProblem {
    pub n: usize,
    pub signs: DMatrix<f64>,
    pub costs: DVector<f64>,
}

impl MlpProblem {
    pub fn maxcut(g: &Graph) -> Result<Self> {
        let n = g.n();
        cap_check(n)?;
        let signs = hypercube_signs(n);
        let ls = &signs * g.laplacian();
        let costs = DVector::from_fn(signs.nrows(), |r, _| -ls.row(r).dot(&signs.row(r)));
        Ok(Self { n, signs, costs })
    }
}

/// Per-score adjoint of `(weight)·E_φ[cost] + (entropy_weight)·H(φ)` for `φ = softmax(f)`.
fn branch_adjoint(
    d: &Distribution,
    costs: &DVector<f64>,
    weight: f64,
    entropy_weight: f64,
) -> (DVector<f64>, f64, f64) {
    let phi = d.probs();
    let mean = phi.dot(costs);
    let h = neg_entropy(d);
    let lp = d.log_probs();
    let adj = DVector::from_fn(phi.len(), |r, _| {
        let ent = if phi[r] > 0.0 { lp[r] - h } else { 0.0 };
        phi[r] * (weight * (costs[r] - mean) + entropy_weight * ent)
    });
    (adj, mean, h)
}

/// Exact loss, regularizer and reverse-mode gradient over all `2^n` solutions.
pub fn mlp_eval(prob: &MlpProblem, p: &MLPParams, beta: f64, lambda: f64) -> Result<MlpEval> {
    if p.n() != prob.n {
        return Err(Error::Dimension(format!("network input {} but n = {}", p.n(), prob.n)));
    }
    let fw = forward(p, &prob.signs);
    if fw.out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("network scores".into()));
    }
    let cold = Distribution::from_log_weights(fw.out.clone())?;
    let (mut delta, mean_c, h_c) = branch_adjoint(&cold, &prob.costs, 1.0 - beta, lambda * (1.0 - beta));
    let mut loss = (1.0 - beta) * mean_c;
    let mut reg = (1.0 - beta) * h_c;
    let density = if beta > 0.0 {
        let r3 = p.rho.powi(3);
        let warm = Distribution::from_log_weights(&fw.out * r3)?;
        let (dw, mean_w, h_w) = branch_adjoint(&warm, &prob.costs, beta, lambda * beta / p.rho);
        delta += dw * r3;
        loss += beta * mean_w;
        reg += beta / p.rho * h_w;
        Distribution::mix(&cold, &warm, beta)
    } else {
        cold
    };

    let l3 = (delta.transpose() * &fw.h2).resize(1, HIDDEN2, 0.0);
    let mut d2 = &delta * &p.l3;
    d2.zip_apply(&fw.h2, |g, h| {
        if h <= 0.0 {
            *g = 0.0
        }
    });
    let l2 = d2.transpose() * &fw.h1;
    let mut d1 = &d2 * &p.l2;
    d1.zip_apply(&fw.h1, |g, h| {
        if h <= 0.0 {
            *g = 0.0
        }
    });
    let l1 = d1.transpose() * &prob.signs;

    Ok(MlpEval {
        loss,
        regularizer: reg,
        reg_loss: loss + lambda * reg,
        grad: MlpGrad { l1, l2, l3 },
        density,
    })
}

/// Gradient of `E_p[−sᵀ L s] + λ·R` for a graph.
pub fn mlp_grad(p: &MLPParams, g: &Graph, beta: f64, lambda: f64) -> Result<MlpEval> {
    mlp_eval(&MlpProblem::maxcut(g)?, p, beta, lambda)
}

#[derive(Debug, Clone, Serialize)]
pub struct MlpRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub loss: f64,
    pub reg_loss: f64,
    pub grad_norm: f64,
    pub argmax: usize,
    /// Cut value of the most likely solution.
    pub argmax_cut: f64,
}

/// Plain gradient descent on the network weights.
pub fn mlp_train(
    prob: &MlpProblem,
    p0: &MLPParams,
    beta: f64,
    schedule: &LambdaSchedule,
    rule: StepRule,
    lr: f64,
    steps: usize,
) -> Result<(MLPParams, Vec<MlpRecord>)> {
    let mut p = p0.clone();
    let (s1, s2) = (p.l1.len(), p.l2.len());
    let mut stepper = Stepper::new(rule, s1 + s2 + p.l3.len());
    let mut records = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let lambda = schedule.at(t);
        let ev = mlp_eval(prob, &p, beta, lambda)?;
        let argmax = ev.density.argmax();
        records.push(MlpRecord {
            iteration: t,
            lambda,
            loss: ev.loss,
            reg_loss: ev.reg_loss,
            grad_norm: ev.grad.norm(),
            argmax,
            argmax_cut: -prob.costs[argmax] / 4.0,
        });
        if t == steps {
            break;
        }
        let flat: Vec<f64> = ev.grad.l1.iter().chain(ev.grad.l2.iter()).chain(ev.grad.l3.iter()).copied().collect();
        let d = stepper.step(&flat, lr);
        for (w, x) in p.l1.iter_mut().chain(p.l2.iter_mut()).chain(p.l3.iter_mut()).zip(d) {
            *w -= x;
        }
    }
    Ok((p, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::erdos_renyi;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn zero_weights_score_zero_and_give_uniform() {
        let p = MLPParams::zeros(4, 0.03);
        assert_eq!(mlp_score(&p, &[1, -1, 1, 1], true), 0.0);
        let d = mlp_density(&p, 4, 0.2).unwrap();
        assert!(d.probs().iter().all(|&x| (x - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn rho_one_and_rho_zero() {
        let mut p = MLPParams::init(5, 1.0, 3, InitScheme::TorchDefault);
        let s = [1, -1, -1, 1, 1];
        assert_eq!(mlp_score(&p, &s, true), mlp_score(&p, &s, false));
        p.rho = 0.0;
        assert_eq!(mlp_score(&p, &s, false), 0.0);
        let d = mlp_density(&p, 5, 1.0).unwrap();
        assert!(d.probs().iter().all(|&x| (x - 1.0 / 32.0).abs() < 1e-15));
    }

    #[test]
    fn init_bounds_and_determinism() {
        for scheme in [InitScheme::TorchDefault, InitScheme::HeUniform] {
            let a = MLPParams::init(15, 0.03, 9, scheme);
            assert_eq!(a, MLPParams::init(15, 0.03, 9, scheme));
            assert!(a.l1.amax() <= scheme.bound(15));
            assert!(a.l2.amax() <= scheme.bound(30));
            assert!(a.l3.amax() <= scheme.bound(10));
        }
    }

    #[test]
    fn json_round_trip() {
        let p = MLPParams::init(6, 0.03, 1, InitScheme::TorchDefault);
        assert_eq!(MLPParams::from_json(&p.to_json().unwrap()).unwrap(), p);
        assert!(MLPParams::from_json("{\"shapes\":[[1,1]],\"rho\":1,\"weights\":[]}").is_err());
    }

    #[test]
    fn entropy_dominated_descent_flattens_density() {
        let g = erdos_renyi(6, 0.5, 2).unwrap();
        let prob = MlpProblem::maxcut(&g).unwrap();
        let p0 = MLPParams::init(6, 0.03, 5, InitScheme::TorchDefault).scaled(3.0);
        let h0 = neg_entropy(&mlp_density(&p0, 6, 0.0).unwrap());
        let (p, _) = mlp_train(&prob, &p0, 0.0, &LambdaSchedule::constant(100.0), StepRule::Gd, 1e-4, 200).unwrap();
        let h1 = neg_entropy(&mlp_density(&p, 6, 0.0).unwrap());
        let floor = -6.0 * 2f64.ln();
        assert!(h1 < h0);
        assert!(h1 >= floor - 1e-12);
        assert!(h1 - floor < 0.5 * (h0 - floor));
    }

    #[test]
    fn zero_init_is_sign_symmetric() {
        let g = erdos_renyi(5, 0.6, 1).unwrap();
        let ev = mlp_grad(&MLPParams::zeros(5, 0.03), &g, 0.2, 1.0).unwrap();
        let p = ev.density.probs();
        for idx in 0..32 {
            assert!((p[idx] - p[31 - idx]).abs() < 1e-15);
        }
    }

    fn finite_difference_check(n: usize, seed: u64, beta: f64, lambda: f64) {
        let g = erdos_renyi(n, 0.5, seed).unwrap();
        let prob = MlpProblem::maxcut(&g).unwrap();
        let p = MLPParams::init(n, 0.03, seed, InitScheme::TorchDefault).scaled(2.0);
        let ev = mlp_eval(&prob, &p, beta, lambda).unwrap();
        let h = 1e-6;
        let f = |q: &MLPParams| mlp_eval(&prob, q, beta, lambda).unwrap().reg_loss;
        let mut fd = MlpGrad {
            l1: DMatrix::zeros(HIDDEN1, n),
            l2: DMatrix::zeros(HIDDEN2, HIDDEN1),
            l3: DMatrix::zeros(1, HIDDEN2),
        };
        for layer in 0..3 {
            let shape = [p.l1.shape(), p.l2.shape(), p.l3.shape()][layer];
            for i in 0..shape.0 {
                for j in 0..shape.1 {
                    let mut a = p.clone();
                    let mut b = p.clone();
                    let (ma, mb, out) = match layer {
                        0 => (&mut a.l1, &mut b.l1, &mut fd.l1),
                        1 => (&mut a.l2, &mut b.l2, &mut fd.l2),
                        _ => (&mut a.l3, &mut b.l3, &mut fd.l3),
                    };
                    ma[(i, j)] += h;
                    mb[(i, j)] -= h;
                    out[(i, j)] = (f(&a) - f(&b)) / (2.0 * h);
                }
            }
        }
        for (an, num) in [(&ev.grad.l1, &fd.l1), (&ev.grad.l2, &fd.l2), (&ev.grad.l3, &fd.l3)] {
            assert!((an - num).norm() <= 1e-5 * an.norm().max(1e-3), "{} vs {}", an.norm(), num.norm());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        finite_difference_check(6, 1, 0.2, 0.7);
        finite_difference_check(5, 2, 0.0, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn warm_score_is_cold_score_of_scaled_network(seed in 0u64..1000, rho in 0.0f64..1.0) {
            let mut p = MLPParams::init(7, rho, seed, InitScheme::TorchDefault);
            p.rho = rho;
            let scaled = p.scaled(rho);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<i8> = (0..7).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            prop_assert_eq!(mlp_score(&p, &s, false), mlp_score(&scaled, &s, true));
            let cold = mlp_score(&p, &s, true);
            prop_assert!((mlp_score(&p, &s, false) - rho.powi(3) * cold).abs() <= 1e-14 * cold.abs().max(1.0));
        }

        #[test]
        fn density_normalized(seed in 0u64..1000) {
            let p = MLPParams::init(6, 0.03, seed, InitScheme::HeUniform).scaled(5.0);
            let d = mlp_density(&p, 6, 0.2).unwrap();
            prop_assert!((d.probs().sum() - 1.0).abs() < 1e-12);
        }
    }
}
