//! Max-Cut suite: vanilla versus entropy-regularized fast/slow training on random graphs.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encodings::encode_maxcut;
use crate::error::{Error, Result};
use crate::generator::{MixtureParams, BETA_STAR, RHO_STAR};
use crate::instance::{erdos_renyi, Graph};
use crate::objective::PriorSpec;
use crate::objective::{evaluate_vector, policy_grad_estimate_with};
use crate::optimizer::{LambdaSchedule, StepRule, Stepper};
use crate::scorer::{mlp_train, InitScheme, MLPParams, MlpProblem};

/// Stream offset separating calibration graphs from trial graphs.
const CALIBRATION_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Linear,
    Relu,
}

impl ScorerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::Linear => "linear",
            ScorerKind::Relu => "relu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `λ = 0`, `β = 0`.
    Vanilla,
    /// Halving `λ` schedule with the fast/slow mixture.
    Regularized,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Regularized => "regularized",
        }
    }
}

/// Starting weights of the linear family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearInit {
    /// `w = 0`, the uniform generator.
    Zero,
    /// Entries uniform in `±1/√(n²)`, the default of a linear layer with `n²` inputs.
    FanIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub n: usize,
    pub p: f64,
    pub trials: usize,
    pub iters: usize,
    pub lambda0: f64,
    pub halve_every: usize,
    pub beta: f64,
    pub rho: f64,
    pub eta_grid: Vec<f64>,
    /// Fixed step sizes; `None` triggers calibration.
    pub eta_linear: Option<f64>,
    pub eta_relu: Option<f64>,
    /// Graphs used to pick the step size, disjoint from the trial graphs.
    pub calibration_trials: usize,
    /// Solutions drawn from the exact density per step; `None` uses exact expectations.
    pub batch: Option<usize>,
    pub optimizer: StepRule,
    pub scorers: Vec<ScorerKind>,
    pub init: InitScheme,
    pub linear_init: LinearInit,
    pub seed: u64,
    /// Worker cap; `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n: 15,
            p: 0.5,
            trials: 100,
            iters: 600,
            lambda0: 10.0,
            halve_every: 60,
            beta: BETA_STAR,
            rho: RHO_STAR,
            eta_grid: vec![0.1, 0.03, 0.01, 0.003],
            eta_linear: None,
            eta_relu: None,
            calibration_trials: 10,
            batch: None,
            optimizer: StepRule::Adam,
            scorers: vec![ScorerKind::Linear, ScorerKind::Relu],
            init: InitScheme::TorchDefault,
            linear_init: LinearInit::FanIn,
            seed: 0,
            workers: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n < 2 || self.n > 20 {
            return bad("n must lie in 2..=20 for exact enumeration");
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad("edge probability must lie in [0, 1]");
        }
        if self.trials == 0 || self.iters == 0 || self.halve_every == 0 {
            return bad("trials, iters and halve_every must be positive");
        }
        if !(self.lambda0 >= 0.0) || !(0.0..=1.0).contains(&self.beta) || !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("need λ₀ ≥ 0, β ∈ [0, 1], ρ ∈ (0, 1]");
        }
        let etas = self.eta_grid.iter().chain(self.eta_linear.iter()).chain(self.eta_relu.iter());
        if etas.clone().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return bad("step sizes must be positive and finite");
        }
        let needs_grid = (self.eta_linear.is_none() && self.scorers.contains(&ScorerKind::Linear))
            || (self.eta_relu.is_none() && self.scorers.contains(&ScorerKind::Relu));
        if needs_grid && (self.eta_grid.is_empty() || self.calibration_trials == 0) {
            return bad("calibration needs a nonempty η grid and at least one calibration graph");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        if self.scorers.is_empty() {
            return bad("no scorer selected");
        }
        Ok(())
    }

    pub fn schedule(&self, variant: Variant) -> LambdaSchedule {
        match variant {
            Variant::Vanilla => LambdaSchedule::constant(0.0),
            Variant::Regularized => LambdaSchedule::halving(self.lambda0, self.halve_every, self.iters),
        }
    }

    pub fn mixture(&self, variant: Variant) -> (f64, f64) {
        match variant {
            Variant::Vanilla => (0.0, 1.0),
            Variant::Regularized => (self.beta, self.rho),
        }
    }
}

/// Deterministic per-index seed drawn from stream `index` of the master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub graph_seed: u64,
    pub scorer: ScorerKind,
    pub variant: Variant,
    pub step_size: f64,
    pub maxcut: f64,
    pub best_cut: f64,
    pub final_cut: f64,
    /// First iteration whose argmax attains the maximum cut.
    pub first_hit: Option<usize>,
    pub success: bool,
    /// Cut of the argmax solution at every iteration.
    pub cuts: Vec<f64>,
    pub elapsed_secs: f64,
}

impl TrialResult {
    pub fn csv_header() -> &'static str {
        "iteration,cut,maxcut"
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", Self::csv_header())?;
        for (t, c) in self.cuts.iter().enumerate() {
            writeln!(out, "{t},{c},{}", self.maxcut)?;
        }
        Ok(())
    }
}

fn summarize(
    trial: usize,
    graph_seed: u64,
    scorer: ScorerKind,
    variant: Variant,
    step_size: f64,
    maxcut: f64,
    cuts: Vec<f64>,
    elapsed_secs: f64,
) -> TrialResult {
    let hit = |c: f64| c >= maxcut - 1e-9 * maxcut.abs().max(1.0);
    let best_cut = cuts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    TrialResult {
        trial,
        graph_seed,
        scorer,
        variant,
        step_size,
        maxcut,
        best_cut,
        final_cut: *cuts.last().unwrap_or(&f64::NAN),
        first_hit: cuts.iter().position(|&c| hit(c)),
        success: hit(best_cut),
        cuts,
        elapsed_secs,
    }
}

/// Linear family `p(s) ∝ exp(w·(ssᵀ)♭)`.
pub fn run_linear_trial(
    g: &Graph,
    cfg: &SuiteConfig,
    variant: Variant,
    eta: f64,
    init_seed: u64,
) -> Result<Vec<f64>> {
    let e = encode_maxcut(g)?.collapse_instance();
    let c = e.cost_vector();
    let raw = e.raw_costs();
    let prior = PriorSpec::single(&e);
    let (beta, rho) = cfg.mixture(variant);
    let schedule = cfg.schedule(variant);
    let mut w = DVector::zeros(e.n_x());
    if cfg.linear_init == LinearInit::FanIn {
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let b = 1.0 / (e.n_x() as f64).sqrt();
        w = w.map(|_: f64| rng.gen_range(-b..=b));
    }
    let mut stepper = Stepper::new(cfg.optimizer, w.len());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(init_seed, 2));
    let mut cuts = Vec::with_capacity(cfg.iters + 1);
    for t in 0..=cfg.iters {
        let lambda = schedule.at(t);
        let ev = evaluate_vector(&e.features, &c, &w, beta, rho, lambda).map_err(|err| match err {
            Error::NonFinite(_) => Error::Divergence {
                iteration: t,
                loss: f64::NAN,
                initial: f64::NAN,
            },
            other => other,
        })?;
        cuts.push(-raw[ev.density.argmax()] / 4.0);
        if t == cfg.iters {
            break;
        }
        let grad = match cfg.batch {
            None => ev.grad,
            Some(b) => {
                let mp = MixtureParams {
                    w: DMatrix::from_row_slice(1, w.len(), w.as_slice()),
                    beta,
                    rho,
                };
                policy_grad_estimate_with(&e, &prior, &mp, lambda, b, &mut rng)?.row(0).transpose()
            }
        };
        w -= DVector::from_vec(stepper.step(grad.as_slice(), eta));
    }
    Ok(cuts)
}

/// Three-layer ReLU scorer from a seeded fan-in initialization.
pub fn run_relu_trial(
    g: &Graph,
    cfg: &SuiteConfig,
    variant: Variant,
    eta: f64,
    init_seed: u64,
) -> Result<Vec<f64>> {
    let prob = MlpProblem::maxcut(g)?;
    let (beta, rho) = cfg.mixture(variant);
    let p0 = MLPParams::init(g.n(), rho, init_seed, cfg.init);
    let (_, records) = mlp_train(&prob, &p0, beta, &cfg.schedule(variant), cfg.optimizer, eta, cfg.iters)?;
    Ok(records.iter().map(|r| r.argmax_cut).collect())
}

fn run_one(
    trial: usize,
    graph_seed: u64,
    g: &Graph,
    maxcut: f64,
    cfg: &SuiteConfig,
    scorer: ScorerKind,
    variant: Variant,
    eta: f64,
) -> Result<TrialResult> {
    let start = Instant::now();
    let cuts = match scorer {
        ScorerKind::Linear => run_linear_trial(g, cfg, variant, eta, init_seed(graph_seed))?,
        ScorerKind::Relu => run_relu_trial(g, cfg, variant, eta, init_seed(graph_seed))?,
    };
    Ok(summarize(
        trial,
        graph_seed,
        scorer,
        variant,
        eta,
        maxcut,
        cuts,
        start.elapsed().as_secs_f64(),
    ))
}

/// Initialization seed shared by both variants of a trial.
pub fn init_seed(graph_seed: u64) -> u64 {
    derive_seed(graph_seed, 1)
}

/// Runs `f` on a pool capped at `workers` threads.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

struct Job {
    trial: usize,
    graph_seed: u64,
    graph: Graph,
    maxcut: f64,
}

fn make_jobs(cfg: &SuiteConfig, count: usize, stream_offset: u64) -> Result<Vec<Job>> {
    (0..count)
        .map(|t| {
            let graph_seed = derive_seed(cfg.seed, stream_offset + t as u64);
            let graph = erdos_renyi(cfg.n, cfg.p, graph_seed)?;
            let maxcut = graph.max_cut_brute_force();
            Ok(Job {
                trial: t,
                graph_seed,
                graph,
                maxcut,
            })
        })
        .collect()
}

fn run_batch(
    jobs: &[Job],
    cfg: &SuiteConfig,
    scorer: ScorerKind,
    variants: &[Variant],
    eta: f64,
) -> Result<Vec<TrialResult>> {
    let tasks: Vec<(&Job, Variant)> = jobs
        .iter()
        .flat_map(|j| variants.iter().map(move |&v| (j, v)))
        .collect();
    tasks
        .par_iter()
        .map(|(j, v)| run_one(j.trial, j.graph_seed, &j.graph, j.maxcut, cfg, scorer, *v, eta))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub eta: f64,
    pub regularized_successes: usize,
    pub vanilla_successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scorer: ScorerKind,
    pub chosen: f64,
    pub entries: Vec<CalibrationEntry>,
}

/// Picks the grid step size with the most regularized successes on the calibration graphs.
///
/// Ties go to more vanilla successes, then to the larger step size.
pub fn calibrate(cfg: &SuiteConfig, scorer: ScorerKind) -> Result<Calibration> {
    let jobs = make_jobs(cfg, cfg.calibration_trials, CALIBRATION_STREAM)?;
    let mut entries = Vec::new();
    for &eta in &cfg.eta_grid {
        let results = run_batch(&jobs, cfg, scorer, &[Variant::Vanilla, Variant::Regularized], eta);
        let count = |v: Variant, rs: &[TrialResult]| rs.iter().filter(|r| r.variant == v && r.success).count();
        let (reg, van) = match results {
            Ok(rs) => (count(Variant::Regularized, &rs), count(Variant::Vanilla, &rs)),
            Err(Error::Divergence { .. }) | Err(Error::NonFinite(_)) => (0, 0),
            Err(e) => return Err(e),
        };
        entries.push(CalibrationEntry {
            eta,
            regularized_successes: reg,
            vanilla_successes: van,
        });
    }
    let best = entries
        .iter()
        .max_by(|a, b| {
            a.regularized_successes
                .cmp(&b.regularized_successes)
                .then(a.vanilla_successes.cmp(&b.vanilla_successes))
                .then(a.eta.total_cmp(&b.eta))
        })
        .expect("nonempty grid");
    Ok(Calibration {
        scorer,
        chosen: best.eta,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSummary {
    pub scorer: ScorerKind,
    pub step_size: f64,
    pub calibration: Option<Calibration>,
    pub vanilla_successes: usize,
    pub regularized_successes: usize,
    pub trials: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub config: SuiteConfig,
    pub summaries: Vec<ScorerSummary>,
    /// Ordered by scorer, then trial, then variant.
    pub trials: Vec<TrialResult>,
    pub elapsed_secs: f64,
}

impl SuiteResult {
    pub fn summary(&self, scorer: ScorerKind) -> Option<&ScorerSummary> {
        self.summaries.iter().find(|s| s.scorer == scorer)
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_suite_inner(cfg))?
}

fn run_suite_inner(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let start = Instant::now();
    let jobs = make_jobs(cfg, cfg.trials, 0)?;
    let mut summaries = Vec::new();
    let mut trials = Vec::new();
    for &scorer in &cfg.scorers {
        let t0 = Instant::now();
        let fixed = match scorer {
            ScorerKind::Linear => cfg.eta_linear,
            ScorerKind::Relu => cfg.eta_relu,
        };
        let calibration = match fixed {
            Some(_) => None,
            None => Some(calibrate(cfg, scorer)?),
        };
        let eta = fixed.unwrap_or_else(|| calibration.as_ref().map_or(f64::NAN, |c| c.chosen));
        let results = run_batch(&jobs, cfg, scorer, &[Variant::Vanilla, Variant::Regularized], eta)?;
        let count = |v: Variant| results.iter().filter(|r| r.variant == v && r.success).count();
        summaries.push(ScorerSummary {
            scorer,
            step_size: eta,
            calibration,
            vanilla_successes: count(Variant::Vanilla),
            regularized_successes: count(Variant::Regularized),
            trials: cfg.trials,
            elapsed_secs: t0.elapsed().as_secs_f64(),
        });
        trials.extend(results);
    }
    Ok(SuiteResult {
        config: cfg.clone(),
        summaries,
        trials,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
