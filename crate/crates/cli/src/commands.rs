use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qg::experiment::{run_suite, SuiteConfig, SuiteResult};
use qg::generator::{BETA_STAR, RHO_STAR};
use qg::landscape::{grid_eval, GridObjective, GridResult, GridSpec};
use qg::optimizer::{run_psgd, LambdaSchedule};
use qg::verify::{check_cyclic_printed_form, run_verify, VerifyLevel, VerifyOptions};
use qg::{
    encode_max_k_csp, encode_maxcut, encode_mincut, encode_mwbm, encode_tsp, validate_encoding,
    DMatrix, DVector, Instance, MixtureParams, PriorSpec, ProblemEncoding, ProblemKind, SGDConfig,
};

use crate::manifest::{write_json, ManifestBuilder, RunManifest};
use crate::{Cli, CliError, Command};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenGraph { n, p } => gen_graph(cli, *n, *p),
        Command::Encode { instance, problem } => encode(cli, instance, problem),
        Command::Optimize { instance, problem } => optimize(cli, instance, problem),
        Command::SuiteMaxcut => suite_maxcut(cli),
        Command::Landscape => landscape(cli),
        Command::Verify => verify(cli),
        Command::Report { dir } => report(dir.as_deref().unwrap_or(&cli.out_dir)),
    }
}

fn load_config<T: DeserializeOwned + Default>(cli: &Cli) -> Result<T, CliError> {
    match &cli.config {
        None => Ok(T::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }
}

fn parse_kind(problem: &str) -> Result<ProblemKind, CliError> {
    problem.parse().map_err(|e: qg::Error| CliError::Config(e.to_string()))
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    Instance::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Encodes `inst` as `kind`; the document type must match the problem.
pub fn encode_instance(inst: &Instance, kind: ProblemKind) -> Result<ProblemEncoding, CliError> {
    let e = match kind {
        ProblemKind::MaxCut => encode_maxcut(&inst.to_graph()?)?,
        ProblemKind::MinCut => encode_mincut(&inst.to_graph()?)?,
        ProblemKind::Csp => encode_max_k_csp(&inst.to_csp()?)?,
        ProblemKind::Mwbm => encode_mwbm(&inst.to_assignment()?)?,
        ProblemKind::Tsp => encode_tsp(&inst.to_assignment()?)?,
        ProblemKind::Custom => return Err(CliError::Config("custom encodings have no instance format".into())),
    };
    Ok(e)
}

fn gen_graph(cli: &Cli, n: usize, p: f64) -> Result<(), CliError> {
    let mb = ManifestBuilder::start("gen-graph");
    let seed = cli.seed.unwrap_or(0);
    let g = qg::erdos_renyi(n, p, seed).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let path = cli.out_dir.join("graph.json");
    Instance::from_graph(&g).write(&path)?;
    println!("wrote {} ({} edges)", path.display(), g.edges().len());
    mb.finish(
        json!({ "n": n, "p": p }),
        vec![seed],
        json!({ "path": path, "edges": g.edges().len() }),
    )
    .write(&cli.out_dir)
}

#[derive(Debug, Serialize)]
struct EncodingSummary {
    problem: ProblemKind,
    solutions: usize,
    n_x: usize,
    n_z: usize,
    d_s: f64,
    d_i: f64,
    c: f64,
    alpha: f64,
    max_feature_norm: f64,
    violations: Vec<String>,
    optimum: f64,
    optimal_solutions: Vec<String>,
}

fn encode(cli: &Cli, instance: &Path, problem: &str) -> Result<(), CliError> {
    let mb = ManifestBuilder::start("encode");
    let kind = parse_kind(problem)?;
    let e = encode_instance(&read_instance(instance)?, kind)?;
    let report = validate_encoding(&e);
    let raw = e.raw_costs();
    let optimum = raw.min();
    let tol = 1e-9 * optimum.abs().max(1.0);
    let summary = EncodingSummary {
        problem: kind,
        solutions: e.len(),
        n_x: e.n_x(),
        n_z: e.n_z(),
        d_s: e.bounds.d_s,
        d_i: e.bounds.d_i,
        c: e.bounds.c,
        alpha: report.alpha,
        max_feature_norm: report.max_feature_norm,
        violations: report.violations.clone(),
        optimum,
        optimal_solutions: (0..raw.len()).filter(|&i| raw[i] <= optimum + tol).map(|i| e.label(i)).collect(),
    };
    write_json(&cli.out_dir.join("encoding.json"), &summary)?;
    println!(
        "{:?}: {} solutions, n_X = {}, α = {:.6e}, optimum {}",
        kind, summary.solutions, summary.n_x, summary.alpha, optimum
    );
    for v in &summary.violations {
        println!("violation: {v}");
    }
    mb.finish(json!({ "instance": instance, "problem": problem }), vec![], serde_json::to_value(&summary)?)
        .write(&cli.out_dir)
}

/// Settings of a single projected-descent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub steps: usize,
    pub step_size: Option<f64>,
    pub batch: Option<usize>,
    /// Constant `λ`, used when no schedule is given.
    pub lambda: f64,
    pub lambda_schedule: Option<LambdaSchedule>,
    pub beta: f64,
    pub rho: f64,
    pub ball_radius: Option<f64>,
    pub cone: Option<bool>,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            step_size: None,
            batch: None,
            lambda: 0.1,
            lambda_schedule: None,
            beta: BETA_STAR,
            rho: RHO_STAR,
            ball_radius: None,
            cone: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
struct OptimizeSummary {
    problem: ProblemKind,
    steps: usize,
    step_size: f64,
    final_loss: f64,
    final_reg_loss: f64,
    final_argmax: String,
    final_argmax_cost: f64,
    best_argmax_cost: f64,
    optimum: f64,
    gap: f64,
}

fn optimize(cli: &Cli, instance: &Path, problem: &str) -> Result<(), CliError> {
    let mb = ManifestBuilder::start("optimize");
    let mut cfg: OptimizeConfig = load_config(cli)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let kind = parse_kind(problem)?;
    let e = encode_instance(&read_instance(instance)?, kind)?.collapse_instance();
    let sgd = SGDConfig {
        steps: cfg.steps,
        step_size: cfg.step_size,
        batch: cfg.batch,
        lambda_schedule: cfg.lambda_schedule.clone().unwrap_or_else(|| LambdaSchedule::constant(cfg.lambda)),
        ball_radius: cfg.ball_radius,
        cone: cfg.cone,
        seed: cfg.seed,
        record_params: false,
    };
    sgd.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mp = MixtureParams::zeros(&e, cfg.beta, cfg.rho).map_err(|e| CliError::Config(e.to_string()))?;
    let traj = run_psgd(&e, &PriorSpec::single(&e), &mp, &sgd)?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut out = BufWriter::new(File::create(cli.out_dir.join("trajectory.csv"))?);
    traj.write_csv(&mut out)?;
    out.flush()?;
    let last = traj.records.last().expect("at least one record");
    let optimum = e.raw_costs().min();
    let summary = OptimizeSummary {
        problem: kind,
        steps: cfg.steps,
        step_size: traj.step_size,
        final_loss: last.loss,
        final_reg_loss: last.reg_loss,
        final_argmax: e.label(last.argmax),
        final_argmax_cost: last.argmax_cost,
        best_argmax_cost: traj.best_argmax_cost(),
        optimum,
        gap: last.argmax_cost - optimum,
    };
    write_json(&cli.out_dir.join("summary.json"), &summary)?;
    println!(
        "{:?}: final argmax {} cost {} (optimum {}, gap {})",
        kind, summary.final_argmax, summary.final_argmax_cost, optimum, summary.gap
    );
    mb.finish(serde_json::to_value(&cfg)?, vec![cfg.seed], serde_json::to_value(&summary)?)
        .write(&cli.out_dir)
}

fn write_trials(dir: &Path, result: &SuiteResult) -> Result<(), CliError> {
    std::fs::create_dir_all(dir.join("cuts"))?;
    let mut table = BufWriter::new(File::create(dir.join("trials.csv"))?);
    writeln!(
        table,
        "scorer,variant,trial,graph_seed,step_size,maxcut,best_cut,final_cut,first_hit,success,elapsed_secs"
    )?;
    for t in &result.trials {
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            t.scorer.name(),
            t.variant.name(),
            t.trial,
            t.graph_seed,
            t.step_size,
            t.maxcut,
            t.best_cut,
            t.final_cut,
            t.first_hit.map_or(String::new(), |h| h.to_string()),
            t.success,
            t.elapsed_secs
        )?;
        let name = format!("{}_{}_{:03}.csv", t.scorer.name(), t.variant.name(), t.trial);
        let mut f = BufWriter::new(File::create(dir.join("cuts").join(name))?);
        t.write_csv(&mut f)?;
        f.flush()?;
    }
    table.flush()?;
    Ok(())
}

fn suite_maxcut(cli: &Cli) -> Result<(), CliError> {
    let mb = ManifestBuilder::start("suite-maxcut");
    let mut cfg: SuiteConfig = load_config(cli)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers()? {
        cfg.workers = Some(w);
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let result = run_suite(&cfg)?;
    write_trials(&cli.out_dir, &result)?;
    let summary = json!({
        "summaries": result.summaries,
        "elapsed_secs": result.elapsed_secs,
    });
    write_json(&cli.out_dir.join("summary.json"), &summary)?;
    for s in &result.summaries {
        println!(
            "{}: η = {}, regularized {}/{}, vanilla {}/{}",
            s.scorer.name(),
            s.step_size,
            s.regularized_successes,
            s.trials,
            s.vanilla_successes,
            s.trials
        );
    }
    let seeds = result.trials.iter().map(|t| t.graph_seed).collect::<std::collections::BTreeSet<_>>();
    let mut all_seeds = vec![cfg.seed];
    all_seeds.extend(seeds);
    mb.finish(serde_json::to_value(&cfg)?, all_seeds, summary).write(&cli.out_dir)
}

/// A two-dimensional feature domain and the grid to evaluate it on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LandscapeConfig {
    pub points: Vec<[f64; 2]>,
    pub c: [f64; 2],
    pub lambda: f64,
    pub beta: f64,
    pub rho: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: (usize, usize),
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            points: vec![[1.0, 0.0], [2.0, 2.0], [0.0, 2.0]],
            c: [-3.0, -3.0],
            lambda: 1.0,
            beta: BETA_STAR,
            rho: RHO_STAR,
            x_range: (-10.0, 20.0),
            y_range: (-10.0, 20.0),
            resolution: (61, 61),
        }
    }
}

const OBJECTIVES: [GridObjective; 3] = [GridObjective::Vanilla, GridObjective::Entropy, GridObjective::EntropyMixture];

pub fn landscape_grids(cfg: &LandscapeConfig) -> Result<Vec<GridResult>, CliError> {
    if cfg.points.is_empty() {
        return Err(CliError::Config("landscape domain has no points".into()));
    }
    let flat: Vec<f64> = cfg.points.iter().flatten().copied().collect();
    let domain = DMatrix::from_row_slice(cfg.points.len(), 2, &flat);
    let c = DVector::from_row_slice(&cfg.c);
    OBJECTIVES
        .iter()
        .map(|&objective| {
            let spec = GridSpec {
                x_range: cfg.x_range,
                y_range: cfg.y_range,
                resolution: cfg.resolution,
                objective,
            };
            spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(grid_eval(&domain, &c, cfg.lambda, cfg.beta, cfg.rho, &spec)?)
        })
        .collect()
}

fn landscape(cli: &Cli) -> Result<(), CliError> {
    let mb = ManifestBuilder::start("landscape");
    let cfg: LandscapeConfig = load_config(cli)?;
    let grids = landscape_grids(&cfg)?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut results = Vec::new();
    for g in &grids {
        let name = g.objective.name();
        std::fs::write(cli.out_dir.join(format!("{name}.csv")), g.to_csv())?;
        std::fs::write(cli.out_dir.join(format!("{name}.svg")), crate::svg::heatmap(g, name))?;
        let (ay, ax) = g.argmin;
        println!(
            "{name}: argmin ({}, {}) {}",
            g.xs[ax],
            g.ys[ay],
            if g.interior { "interior" } else { "boundary" }
        );
        results.push(json!({
            "objective": name,
            "argmin": [g.xs[ax], g.ys[ay]],
            "argmin_cell": [ay, ax],
            "interior": g.interior,
            "min_value": g.values[(ay, ax)],
        }));
    }
    let results = Value::Array(results);
    write_json(&cli.out_dir.join("landscape.json"), &results)?;
    mb.finish(serde_json::to_value(&cfg)?, vec![], results).write(&cli.out_dir)
}

fn verify(cli: &Cli) -> Result<(), CliError> {
    let mb = ManifestBuilder::start("verify");
    let level: VerifyLevel = cli.level.parse().map_err(|e: qg::Error| CliError::Config(e.to_string()))?;
    let opts = VerifyOptions {
        level,
        seed: cli.seed.unwrap_or(0),
        perturb_correlation: 0.0,
    };
    let report = run_verify(&opts)?;
    for c in &report.checks {
        println!(
            "{} {:<40} worst {:.3e} (tol {:.0e}, {} cases)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance,
            c.cases
        );
    }
    let printed = check_cyclic_printed_form(if level == VerifyLevel::Deep { 7 } else { 6 }, opts.seed)?;
    println!(
        "INFO {:<40} worst {:.3e}: the printed cyclic-permutation closed form does not match enumeration",
        printed.name, printed.worst
    );
    std::fs::create_dir_all(&cli.out_dir)?;
    let results = json!({ "passed": report.passed(), "report": report, "informational": [printed] });
    write_json(&cli.out_dir.join("verify.json"), &results)?;
    mb.finish(json!({ "level": cli.level }), vec![opts.seed], results).write(&cli.out_dir)?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Verify(failed.join(", ")))
    }
}

/// Markdown summary of a run directory's manifest.
pub fn render_report(m: &RunManifest) -> String {
    let mut out = format!(
        "# {}\n\nversion {}, {:.1} s wall clock, seeds: {}\n\n",
        m.command,
        m.version,
        m.wall_clock_secs,
        m.seeds.iter().take(8).map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
            + if m.seeds.len() > 8 { ", …" } else { "" }
    );
    match m.command.as_str() {
        "suite-maxcut" => {
            out.push_str("| scorer | η | regularized | vanilla | trials |\n|---|---|---|---|---|\n");
            for s in m.results["summaries"].as_array().into_iter().flatten() {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} |\n",
                    s["scorer"].as_str().unwrap_or("?"),
                    s["step_size"],
                    s["regularized_successes"],
                    s["vanilla_successes"],
                    s["trials"]
                ));
            }
        }
        "verify" => {
            let checks = m.results["report"]["checks"].as_array().cloned().unwrap_or_default();
            let passed = checks.iter().filter(|c| c["passed"] == Value::Bool(true)).count();
            out.push_str(&format!("{passed}/{} checks passed\n\n", checks.len()));
            for c in checks.iter().filter(|c| c["passed"] != Value::Bool(true)) {
                out.push_str(&format!("- FAIL {}\n", c["name"].as_str().unwrap_or("?")));
            }
        }
        _ => {
            out.push_str("```json\n");
            out.push_str(&serde_json::to_string_pretty(&m.results).unwrap_or_default());
            out.push_str("\n```\n");
        }
    }
    out
}

fn report(dir: &Path) -> Result<(), CliError> {
    let m = RunManifest::read(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let text = render_report(&m);
    std::fs::write(dir.join("report.md"), &text)?;
    print!("{text}");
    Ok(())
}
