//! Projected gradient descent on the regularized mixture objective.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::{brute_force_optimum, ProblemEncoding};
use crate::error::{Error, Result};
use crate::generator::MixtureParams;
use crate::math::uniform_in_ball;
use crate::generator::{BETA_STAR, RHO_STAR};
use crate::objective::{exact_grad, exact_loss, policy_grad_estimate_with, PriorSpec};

/// Clamp to the nonnegative cone (if requested), then scale into the Frobenius ball.
pub fn project(w: &DMatrix<f64>, ball_radius: f64, cone: bool) -> DMatrix<f64> {
    let mut out = if cone { w.map(|x| x.max(0.0)) } else { w.clone() };
    let norm = out.norm();
    if norm > ball_radius {
        out *= ball_radius / norm;
    }
    out
}

/// Update rule applied to a gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// `w ← w − η·g`.
    Gd,
    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    Adam,
}

/// Adam moment state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// Step to subtract from the parameters for gradient `g`.
    pub fn step(&mut self, g: &[f64], lr: f64) -> Vec<f64> {
        assert_eq!(g.len(), self.m.len(), "gradient length");
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        g.iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&gi, (m, v))| {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * gi;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * gi * gi;
                lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS)
            })
            .collect()
    }
}

/// Stateful wrapper applying a [`StepRule`].
#[derive(Debug, Clone)]
pub enum Stepper {
    Gd,
    Adam(Adam),
}

impl Stepper {
    pub fn new(rule: StepRule, dim: usize) -> Self {
        match rule {
            StepRule::Gd => Stepper::Gd,
            StepRule::Adam => Stepper::Adam(Adam::new(dim)),
        }
    }

    pub fn step(&mut self, g: &[f64], lr: f64) -> Vec<f64> {
        match self {
            Stepper::Gd => g.iter().map(|x| lr * x).collect(),
            Stepper::Adam(a) => a.step(g, lr),
        }
    }
}

/// Piecewise-constant `λ` given as `(first iteration, value)` breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule(pub Vec<(usize, f64)>);

impl LambdaSchedule {
    pub fn constant(lambda: f64) -> Self {
        Self(vec![(0, lambda)])
    }

    /// `λ₀` divided by two every `every` iterations.
    pub fn halving(lambda0: f64, every: usize, steps: usize) -> Self {
        let every = every.max(1);
        Self(
            (0..=steps / every)
                .map(|k| (k * every, lambda0 / 2f64.powi(k as i32)))
                .collect(),
        )
    }

    pub fn at(&self, t: usize) -> f64 {
        self.0
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .or(self.0.first())
            .map(|p| p.1)
            .unwrap_or(0.0)
    }

    pub fn min_positive(&self) -> Option<f64> {
        self.0
            .iter()
            .map(|p| p.1)
            .filter(|&l| l > 0.0)
            .fold(None, |acc, l| Some(acc.map_or(l, |a: f64| a.min(l))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SGDConfig {
    pub steps: usize,
    /// `None` uses `0.1/(D_S²·D_I²)`.
    pub step_size: Option<f64>,
    /// `None` uses exact gradients; `Some(b)` uses `b` policy-gradient samples per step.
    pub batch: Option<usize>,
    pub lambda_schedule: LambdaSchedule,
    /// `None` uses `‖M‖_F/λ_min`, or no ball when every `λ` is zero.
    pub ball_radius: Option<f64>,
    /// `None` follows the encoding's cone flag.
    pub cone: Option<bool>,
    pub seed: u64,
    /// Keep `W_t` in every record.
    pub record_params: bool,
}

impl Default for SGDConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            step_size: None,
            batch: None,
            lambda_schedule: LambdaSchedule::constant(0.1),
            ball_radius: None,
            cone: None,
            seed: 0,
            record_params: false,
        }
    }
}

impl SGDConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.lambda_schedule.0.is_empty() {
            return Err(Error::Config("λ schedule is empty".into()));
        }
        if self.lambda_schedule.0.iter().any(|p| !(p.1 >= 0.0)) {
            return Err(Error::Config("λ values must be nonnegative".into()));
        }
        if let Some(b) = self.ball_radius {
            if !(b > 0.0) {
                return Err(Error::Config("ball radius must be positive".into()));
            }
        }
        if let Some(eta) = self.step_size {
            if !(eta >= 0.0) || !eta.is_finite() {
                return Err(Error::Config("step size must be finite and nonnegative".into()));
            }
        }
        if self.batch == Some(0) {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        Ok(())
    }

    pub fn effective_step_size(&self, e: &ProblemEncoding) -> f64 {
        self.step_size
            .unwrap_or_else(|| 0.1 / (e.bounds.d_s.powi(2) * e.bounds.d_i.powi(2)).max(1e-300))
    }

    pub fn effective_radius(&self, e: &ProblemEncoding) -> f64 {
        self.ball_radius.unwrap_or_else(|| {
            self.lambda_schedule
                .min_positive()
                .map_or(f64::INFINITY, |l| e.cost_matrix.norm() / l)
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub loss: f64,
    pub reg_loss: f64,
    pub grad_norm: f64,
    pub correlation: f64,
    /// Most likely solution under the current generator.
    pub argmax: usize,
    /// Native objective of that solution.
    pub argmax_cost: f64,
    pub elapsed_secs: f64,
    #[serde(skip)]
    pub params: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub beta: f64,
    pub rho: f64,
    pub step_size: f64,
    pub ball_radius: f64,
    pub records: Vec<IterRecord>,
    #[serde(skip)]
    pub final_params: DMatrix<f64>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "iteration,lambda,loss,reg_loss,grad_norm,correlation,argmax,argmax_cost,elapsed_secs"
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{:.6}",
                r.iteration,
                r.lambda,
                r.loss,
                r.reg_loss,
                r.grad_norm,
                r.correlation,
                r.argmax,
                r.argmax_cost,
                r.elapsed_secs
            )?;
        }
        Ok(())
    }

    /// Lowest native objective among the argmax solutions visited.
    pub fn best_argmax_cost(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.argmax_cost)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Projected descent from `mp0`; deterministic given the config.
pub fn run_psgd(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp0: &MixtureParams,
    cfg: &SGDConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    mp0.validate()?;
    let eta = cfg.effective_step_size(e);
    let radius = cfg.effective_radius(e);
    let cone = cfg.cone.unwrap_or(e.param_cone);
    let raw = e.raw_costs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();

    let mut mp = mp0.clone();
    let mut records = Vec::with_capacity(cfg.steps + 1);
    let mut initial = None;
    for t in 0..=cfg.steps {
        let lambda = cfg.lambda_schedule.at(t);
        let rep = match exact_grad(e, prior, &mp, lambda) {
            Err(Error::NonFinite(_)) => {
                return Err(Error::Divergence {
                    iteration: t,
                    loss: f64::NAN,
                    initial: initial.unwrap_or(f64::NAN),
                })
            }
            other => other?,
        };
        let l0 = *initial.get_or_insert(rep.reg_loss);
        if !rep.reg_loss.is_finite() || rep.reg_loss - l0 > 1e3 * l0.abs().max(1.0) {
            return Err(Error::Divergence {
                iteration: t,
                loss: rep.reg_loss,
                initial: l0,
            });
        }
        records.push(IterRecord {
            iteration: t,
            lambda,
            loss: rep.loss,
            reg_loss: rep.reg_loss,
            grad_norm: rep.gradient_norm,
            correlation: rep.correlation_lhs,
            argmax: rep.argmax,
            argmax_cost: raw[rep.argmax],
            elapsed_secs: start.elapsed().as_secs_f64(),
            params: cfg.record_params.then(|| mp.w.clone()),
        });
        if t == cfg.steps {
            break;
        }
        let g = match cfg.batch {
            None => rep.gradient,
            Some(b) => policy_grad_estimate_with(e, prior, &mp, lambda, b, &mut rng)?,
        };
        mp.w = project(&(&mp.w - g * eta), radius, cone);
    }
    Ok(Trajectory {
        beta: mp.beta,
        rho: mp.rho,
        step_size: eta,
        ball_radius: radius,
        records,
        final_params: mp.w,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasarCertificate {
    pub gamma_hat: f64,
    pub min_numerator: f64,
    pub samples: usize,
    pub used: usize,
    /// `(numerator, denominator)` for every sample.
    pub witnesses: Vec<(f64, f64)>,
}

/// Sample `W` uniformly in the ball and take the minimum of
/// `∇L_λ(W)·(W + M/λ) / (L_λ(W) − L_λ(−M/λ))`.
pub fn quasar_certificate(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    lambda: f64,
    mp_template: &MixtureParams,
    n_samples: usize,
    seed: u64,
    ball_radius: Option<f64>,
) -> Result<QuasarCertificate> {
    if !(lambda > 0.0) {
        return Err(Error::Config("certificate needs λ > 0".into()));
    }
    let radius = ball_radius.unwrap_or(e.cost_matrix.norm() / lambda);
    let reference = reference_reg_loss(e, prior, mp_template, lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut witnesses = Vec::with_capacity(n_samples);
    let (mut gamma, mut min_num, mut used) = (f64::INFINITY, f64::INFINITY, 0);
    for _ in 0..n_samples {
        let w = uniform_in_ball(&mut rng, e.n_z(), e.n_x(), radius);
        let (num, den) = quasar_ratio_terms(e, prior, &mp_template.with_w(w), lambda, reference)?;
        min_num = min_num.min(num);
        if den > 1e-10 {
            gamma = gamma.min(num / den);
            used += 1;
        }
        witnesses.push((num, den));
    }
    Ok(QuasarCertificate {
        gamma_hat: gamma,
        min_numerator: min_num,
        samples: n_samples,
        used,
        witnesses,
    })
}

/// `L_λ(−M/λ)` for the template's mixture weights.
pub fn reference_reg_loss(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp_template: &MixtureParams,
    lambda: f64,
) -> Result<f64> {
    let target = -&e.cost_matrix / lambda;
    Ok(exact_grad(e, prior, &mp_template.with_w(target), lambda)?.reg_loss)
}

/// `(∇L_λ(W)·(W + M/λ), L_λ(W) − reference)`.
pub fn quasar_ratio_terms(
    e: &ProblemEncoding,
    prior: &PriorSpec,
    mp: &MixtureParams,
    lambda: f64,
    reference: f64,
) -> Result<(f64, f64)> {
    let rep = exact_grad(e, prior, mp, lambda)?;
    let num = rep.gradient.dot(&(&mp.w + &e.cost_matrix / lambda));
    Ok((num, rep.reg_loss - reference))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub average_loss: f64,
    pub best_loss: f64,
    /// `L(−M/λ)`.
    pub reference_loss: f64,
    pub average_gap: f64,
    pub best_gap: f64,
    pub optimum: f64,
    pub average_gap_to_optimum: f64,
    pub best_gap_to_optimum: f64,
}

pub fn convergence_report(
    traj: &Trajectory,
    e: &ProblemEncoding,
    prior: &PriorSpec,
    lambda: f64,
) -> Result<ConvergenceSummary> {
    if traj.records.is_empty() {
        return Err(Error::Config("empty trajectory".into()));
    }
    let losses: Vec<f64> = traj.records.iter().map(|r| r.loss).collect();
    let average_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    let best_loss = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let reference_loss = if lambda > 0.0 {
        let mp = MixtureParams {
            w: -&e.cost_matrix / lambda,
            beta: traj.beta,
            rho: traj.rho,
        };
        exact_grad(e, prior, &mp, lambda)?.loss
    } else {
        f64::NEG_INFINITY
    };
    let (optimum, _) = brute_force_optimum(e);
    Ok(ConvergenceSummary {
        average_loss,
        best_loss,
        reference_loss,
        average_gap: average_loss - reference_loss,
        best_gap: best_loss - reference_loss,
        optimum,
        average_gap_to_optimum: average_loss - optimum,
        best_gap_to_optimum: best_loss - optimum,
    })
}

/// Constants under which `−M/λ` is `ε`-optimal.
///
/// `ε = rel_eps·range`, `ε_in = ε/2`, `δ = β = ε/(4·range)`,
/// `1/λ = 1.01·log(|X|/δ)/ε_in`; the slow branch then costs at most `β·range`
/// and the fast branch at most `ε_in + δ·range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompletenessParams {
    pub eps: f64,
    pub eps_in: f64,
    pub delta: f64,
    pub beta: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl CompletenessParams {
    pub fn for_encoding(e: &ProblemEncoding, rel_eps: f64) -> Self {
        let range = e.cost_range();
        // Ranges at rounding level count as flat.
        if !(range > 1e-9 * e.costs().amax().max(1.0)) {
            return Self {
                eps: 0.0,
                eps_in: 0.0,
                delta: 0.0,
                beta: BETA_STAR,
                rho: RHO_STAR,
                lambda: 1.0,
            };
        }
        let eps = rel_eps * range;
        let eps_in = eps / 2.0;
        let delta = eps / (4.0 * range);
        let inv_lambda = 1.01 * (e.len() as f64 / delta).ln() / eps_in;
        Self {
            eps,
            eps_in,
            delta,
            beta: delta,
            rho: RHO_STAR,
            lambda: 1.0 / inv_lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompletenessCheck {
    pub params: CompletenessParams,
    /// `L(−M/λ)` under the mixture `(β, ρ)`.
    pub loss: f64,
    pub optimum: f64,
    pub holds: bool,
}

/// Exact `L(−M/λ) ≤ opt + ε` for the constants of [`CompletenessParams`].
pub fn completeness_check(e: &ProblemEncoding, prior: &PriorSpec, rel_eps: f64) -> Result<CompletenessCheck> {
    let params = CompletenessParams::for_encoding(e, rel_eps);
    let mp = MixtureParams {
        w: -&e.cost_matrix / params.lambda,
        beta: params.beta,
        rho: params.rho,
    };
    let loss = exact_loss(e, prior, &mp)?;
    let (optimum, _) = brute_force_optimum(e);
    let tol = 1e-9 * optimum.abs().max(1.0);
    Ok(CompletenessCheck {
        params,
        loss,
        optimum,
        holds: loss <= optimum + params.eps + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{encode_maxcut, encode_mincut};
    use crate::generator::mixture_density;
    use crate::instance::{erdos_renyi, Graph};
    use proptest::prelude::*;

    fn single_edge() -> ProblemEncoding {
        encode_maxcut(&Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let w = DMatrix::from_row_slice(1, 2, &[0.3, 0.4]);
        assert_eq!(project(&w, 1.0, false), w);
        let w = DMatrix::from_row_slice(1, 2, &[6.0, 8.0]);
        let p = project(&w, 5.0, false);
        assert!((p.norm() - 5.0).abs() < 1e-12);
        assert!((p[(0, 0)] / p[(0, 1)] - 0.75).abs() < 1e-12);
        let w = DMatrix::from_row_slice(1, 2, &[-3.0, 1.0]);
        assert_eq!(project(&w, 10.0, true), DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
    }

    #[test]
    fn halving_schedule() {
        let s = LambdaSchedule::halving(10.0, 60, 600);
        assert_eq!(s.at(0), 10.0);
        assert_eq!(s.at(59), 10.0);
        assert_eq!(s.at(60), 5.0);
        assert_eq!(s.at(599), 10.0 / 512.0);
    }

    #[test]
    fn single_edge_run_concentrates_on_cuts() {
        let e = single_edge();
        let prior = PriorSpec::single(&e);
        let cfg = SGDConfig {
            steps: 500,
            step_size: Some(0.1),
            lambda_schedule: LambdaSchedule::constant(0.1),
            ..Default::default()
        };
        let mp0 = MixtureParams::zeros(&e, 0.0, 1.0).unwrap();
        let traj = run_psgd(&e, &prior, &mp0, &cfg).unwrap();
        assert_eq!(traj.records.len(), 501);
        let d = mixture_density(&e, &mp0.with_w(traj.final_params.clone())).unwrap();
        let p = d.probs();
        assert!(p[1] + p[2] >= 0.99);
        let summary = convergence_report(&traj, &e, &prior, 0.1).unwrap();
        assert!(summary.average_gap <= 0.1);
    }

    #[test]
    fn zero_cost_relaxes_to_uniform() {
        let e = encode_maxcut(&Graph::empty(3).unwrap()).unwrap();
        let prior = PriorSpec::single(&e);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w0 = uniform_in_ball(&mut rng, 9, 9, 0.5);
        let cfg = SGDConfig {
            steps: 2000,
            step_size: Some(0.05),
            lambda_schedule: LambdaSchedule::constant(1.0),
            ball_radius: Some(1.0),
            ..Default::default()
        };
        let mp0 = MixtureParams::new(w0, 0.0, 1.0).unwrap();
        let traj = run_psgd(&e, &prior, &mp0, &cfg).unwrap();
        // Only the instance-visible direction decays; here z = 0, so the generator is uniform throughout.
        let d = mixture_density(&e, &mp0.with_w(traj.final_params.clone())).unwrap();
        assert!((d.probs().amax() - 1.0 / 8.0).abs() < 1e-12);
        let summary = convergence_report(&traj, &e, &prior, 1.0).unwrap();
        assert!(summary.average_gap.abs() < 1e-12);
        assert!(summary.best_gap_to_optimum.abs() < 1e-12);
    }

    #[test]
    fn zero_cost_with_collapsed_instance_decays_parameters() {
        let e = ProblemEncoding::from_points(
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 2.0, 0.0, 2.0]),
            nalgebra::DVector::zeros(2),
        )
        .unwrap();
        let prior = PriorSpec::single(&e);
        let cfg = SGDConfig {
            steps: 3000,
            step_size: Some(0.2),
            lambda_schedule: LambdaSchedule::constant(1.0),
            ball_radius: Some(10.0),
            ..Default::default()
        };
        let mp0 = MixtureParams::new(DMatrix::from_row_slice(1, 2, &[1.0, -0.5]), 0.0, 1.0).unwrap();
        let traj = run_psgd(&e, &prior, &mp0, &cfg).unwrap();
        let d = mixture_density(&e, &mp0.with_w(traj.final_params.clone())).unwrap();
        assert!((d.probs().amax() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_step_is_constant() {
        let e = single_edge();
        let prior = PriorSpec::single(&e);
        let cfg = SGDConfig {
            steps: 20,
            step_size: Some(0.0),
            ..Default::default()
        };
        let mp0 = MixtureParams::new(DMatrix::from_element(4, 4, 0.1), 0.2, 0.03).unwrap();
        let traj = run_psgd(&e, &prior, &mp0, &cfg).unwrap();
        assert_eq!(traj.final_params, mp0.w);
        assert!(traj.records.iter().all(|r| r.loss == traj.records[0].loss));
    }

    #[test]
    fn mincut_iterates_stay_in_cone() {
        let e = encode_mincut(&erdos_renyi(4, 0.6, 3).unwrap()).unwrap();
        let prior = PriorSpec::single(&e);
        let cfg = SGDConfig {
            steps: 50,
            step_size: Some(0.05),
            lambda_schedule: LambdaSchedule::constant(0.5),
            record_params: true,
            ..Default::default()
        };
        let mp0 = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
        let traj = run_psgd(&e, &prior, &mp0, &cfg).unwrap();
        for r in &traj.records {
            let w = r.params.as_ref().unwrap();
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!(w.norm() <= traj.ball_radius + 1e-12);
        }
    }

    #[test]
    fn divergence_guard_trips() {
        let e = single_edge();
        let prior = PriorSpec::single(&e);
        let bad = SGDConfig {
            steps: 10,
            step_size: Some(-1.0),
            ..Default::default()
        };
        let mp0 = MixtureParams::zeros(&e, 0.0, 1.0).unwrap();
        assert!(matches!(run_psgd(&e, &prior, &mp0, &bad), Err(Error::Config(_))));
        // Without λ there is no ball, and an absurd step overflows the parameters.
        let cfg = SGDConfig {
            steps: 10,
            step_size: Some(1e308),
            lambda_schedule: LambdaSchedule::constant(0.0),
            ..Default::default()
        };
        assert!(matches!(
            run_psgd(&e, &prior, &mp0, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn quasar_certificate_positive_with_mixture() {
        let e = encode_maxcut(&erdos_renyi(4, 0.6, 7).unwrap()).unwrap().collapse_instance();
        let prior = PriorSpec::single(&e);
        let tmpl = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
        let cert = quasar_certificate(&e, &prior, 0.5, &tmpl, 50, 3, None).unwrap();
        assert!(cert.gamma_hat > 0.0);
        assert!(cert.min_numerator >= -1e-10);
    }

    #[test]
    fn certificate_target_is_zero_over_zero() {
        let e = single_edge().collapse_instance();
        let prior = PriorSpec::single(&e);
        let lambda = 0.5;
        let tmpl = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
        let reference = reference_reg_loss(&e, &prior, &tmpl, lambda).unwrap();
        let at_target = tmpl.with_w(-&e.cost_matrix / lambda);
        let (num, den) = quasar_ratio_terms(&e, &prior, &at_target, lambda, reference).unwrap();
        assert!(num.abs() < 1e-12);
        assert!(den.abs() <= 1e-10);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut a = Adam::new(3);
        let d = a.step(&[2.0, -1e-3, 0.0], 0.1);
        assert!((d[0] - 0.1).abs() < 1e-9);
        assert!((d[1] + 0.1).abs() < 1e-5);
        assert_eq!(d[2], 0.0);
        // Constant gradients keep unit-size normalized steps.
        for _ in 0..50 {
            let d = a.step(&[2.0, -1e-3, 0.0], 0.1);
            assert!((d[0] - 0.1).abs() < 1e-6);
        }
        let mut gd = Stepper::new(StepRule::Gd, 2);
        assert_eq!(gd.step(&[1.0, -2.0], 0.5), vec![0.5, -1.0]);
    }

    #[test]
    fn completeness_constants() {
        let e = encode_maxcut(&erdos_renyi(5, 0.6, 2).unwrap()).unwrap().collapse_instance();
        let p = CompletenessParams::for_encoding(&e, 0.1);
        let range = e.cost_range();
        assert!((p.eps - 0.1 * range).abs() < 1e-12);
        assert!((p.delta - 0.025).abs() < 1e-15);
        assert!((1.0 / p.lambda - 1.01 * (32.0f64 / 0.025).ln() / p.eps_in).abs() < 1e-9);
        let c = completeness_check(&e, &PriorSpec::single(&e), 0.1).unwrap();
        assert!(c.holds, "{c:?}");
        let flat = encode_maxcut(&Graph::empty(3).unwrap()).unwrap().collapse_instance();
        assert!(completeness_check(&flat, &PriorSpec::single(&flat), 0.1).unwrap().holds);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn iterates_stay_in_ball_and_loss_decreases(seed in 0u64..1000) {
            let g = erdos_renyi(4, 0.5, seed).unwrap();
            let e = encode_maxcut(&g).unwrap().collapse_instance();
            let prior = PriorSpec::single(&e);
            let lambda = 0.5;
            let cfg = SGDConfig {
                steps: 100,
                step_size: Some(0.002),
                lambda_schedule: LambdaSchedule::constant(lambda),
                seed,
                record_params: true,
                ..Default::default()
            };
            let mp0 = MixtureParams::zeros(&e, 0.2, 0.03).unwrap();
            let traj = run_psgd(&e, &prior, &mp0, &cfg).unwrap();
            for pair in traj.records.windows(2) {
                prop_assert!(pair[1].reg_loss <= pair[0].reg_loss + 1e-12);
            }
            for r in &traj.records {
                prop_assert!(r.params.as_ref().unwrap().norm() <= traj.ball_radius + 1e-12);
            }
            let again = run_psgd(&e, &prior, &mp0, &cfg).unwrap();
            prop_assert_eq!(traj.final_params, again.final_params);
        }
    }
}
