//! Problem construction, solver matrix execution and CSV output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use markov_vi::glm_ar::{ArGlmProblem, Link};
use markov_vi::gridworld::{self, random_projection};
use markov_vi::markov::{robust_tau, stream_rng, tau_lower_bound, BatchSpec, MixingParams, SampleStream};
use markov_vi::policy_eval::{compile_vi, induce_chain, tabular_features, FiniteMdp, Policy, PolicyEvalVi};
use markov_vi::solvers::{
    run_solver, Budget, CompiledSchedule, Monitor, RunConfig, SolverRun, StepSchedule,
    TraceConfig, TracePoint,
};
use markov_vi::vi_core::{
    bregman, residual, AffineOperator, ExactOperator, FeasibleRegion, Point, ProblemParams, StochasticOperator,
};
use markov_vi::{DMatrix, Error as CoreError};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{
    file_stem, AlgorithmConfig, BudgetKind, ExperimentConfig, Features, GlmConfig, LinkConfig, Metric, ProblemConfig,
    ScheduleKind,
};
use crate::error::{BenchError, Result};
use crate::mdp_io;
use crate::report::{compare_report, format_summary, SummaryRow};

/// Fixed per-algorithm CSV header.
pub const RECORD_COLUMNS: [&str; 9] = [
    "algorithm",
    "seed",
    "iter",
    "samples",
    "gamma",
    "lambda",
    "weighted_error",
    "bregman_to_star",
    "bellman_residual",
];

/// Horizon of the mixing estimate when τ must be derived.
const MIXING_HORIZON: usize = 400;

pub enum Instance {
    Policy(Box<PolicyEvalVi>),
    Glm {
        problem: Box<ArGlmProblem>,
        exact: Option<AffineOperator>,
    },
}

/// A built problem with the constants its schedules need.
pub struct Prepared {
    pub instance: Instance,
    pub x_star: Point,
    pub x1: Point,
    pub params: ProblemParams,
    pub region: FeasibleRegion,
    mixing: Option<MixingParams>,
}

impl Prepared {
    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn mixing(&self) -> Option<MixingParams> {
        self.mixing
    }
}

fn problem_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::config("problem", e.to_string())
}

fn features(f: &Features, n: usize) -> Result<DMatrix<f64>> {
    match f {
        Features::Named(s) if s == "tabular" => Ok(tabular_features(n)),
        Features::Named(s) => Err(BenchError::config("problem.features", format!("unknown features `{s}`"))),
        Features::Projection { projection, seed } => {
            random_projection(n, *projection, *seed).map_err(|e| BenchError::config("problem.features", e.to_string()))
        }
    }
}

fn smallest_singular(phi: &DMatrix<f64>) -> f64 {
    phi.clone().singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

fn prepare_policy(mdp: &FiniteMdp, policy: &Policy, feats: &Features, cfg: &ExperimentConfig) -> Result<Prepared> {
    let chain = induce_chain(mdp, policy).map_err(problem_err)?;
    let phi = features(feats, mdp.n_states())?;
    let smin = smallest_singular(&phi);
    let beta = mdp.beta();
    let vi = compile_vi(&chain, phi, beta).map_err(problem_err)?;
    let (sigma, varsigma) = vi.noise_constants();
    let mut params = ProblemParams::deterministic(vi.mu, vi.lip);
    params.lip_bar = vi.lip_bar();
    params.sigma = sigma;
    params.varsigma = varsigma;
    let needs_mixing = cfg.tau.is_none() && cfg.algorithms.iter().any(|a| a.tau.is_none());
    let mixing = if needs_mixing {
        let m = vi.estimate_mixing(MIXING_HORIZON).map_err(|e| {
            BenchError::config("tau", format!("mixing estimate failed ({e}); set tau explicitly"))
        })?;
        params.c_mix = m.c_mix;
        params.rho_mix = m.rho_mix;
        Some(m)
    } else {
        None
    };
    let rmax = mdp.triples().map(|t| t.4.abs()).fold(0.0, f64::max);
    let n = mdp.n_states() as f64;
    let auto = (n.sqrt() * rmax / ((1.0 - beta) * smin)).max(2.0 * vi.theta_star.norm()).max(1.0);
    let x_star = vi.theta_star.clone();
    let x1 = Point::zeros(x_star.len());
    let mut p = Prepared {
        instance: Instance::Policy(Box::new(vi)),
        x_star,
        x1,
        params,
        region: FeasibleRegion::WholeSpace,
        mixing,
    };
    set_region(&mut p, cfg, auto)?;
    Ok(p)
}

fn set_region(p: &mut Prepared, cfg: &ExperimentConfig, auto: f64) -> Result<()> {
    if cfg.unconstrained {
        return Ok(());
    }
    let radius = cfg.region_radius.unwrap_or(auto);
    let region = FeasibleRegion::origin_ball(p.dim(), radius).map_err(|e| BenchError::config("region_radius", e.to_string()))?;
    if !region.contains(&p.x_star) {
        return Err(BenchError::config("region_radius", format!("ball of radius {radius} excludes the solution")));
    }
    p.params.diam = Some(2.0 * radius);
    p.params.ball_g = Some(radius);
    p.region = region;
    Ok(())
}

fn prepare_glm(g: &GlmConfig, cfg: &ExperimentConfig) -> Result<Prepared> {
    let q = random_projection(g.dim, g.dim, g.seed).map_err(problem_err)?;
    let n = g.dim as f64;
    let scales = Point::from_fn(g.dim, |i, _| g.ar_coef * (1.0 - i as f64 / (2.0 * n)));
    let b = q * DMatrix::from_diagonal(&scales);
    let cov = DMatrix::identity(g.dim, g.dim) * g.noise_var;
    let mut rng = stream_rng(g.seed, 1);
    let x_star = Point::from_fn(g.dim, |_, _| StandardNormal.sample(&mut rng));
    let link = match g.link {
        LinkConfig::Identity => Link::Identity,
        LinkConfig::Ramp => Link::Ramp,
    };
    let problem = ArGlmProblem::new(b, cov, x_star.clone(), link, g.label_noise_sd).map_err(problem_err)?;
    let rho = g.ar_coef.max(1e-12);
    let mut params = problem.identity_params(g.c_mix, rho).map_err(problem_err)?;
    let exact = match link {
        Link::Identity => Some(problem.exact_operator().map_err(problem_err)?),
        Link::Ramp => None,
    };
    let mixing = Some(MixingParams::new(g.c_mix, rho).map_err(problem_err)?);
    let x1 = Point::zeros(g.dim);
    let auto = 2.0 * x_star.norm() + 1.0;
    let mut p = Prepared {
        instance: Instance::Glm {
            problem: Box::new(problem),
            exact,
        },
        x_star,
        x1,
        params,
        region: FeasibleRegion::WholeSpace,
        mixing,
    };
    set_region(&mut p, cfg, auto)?;
    if link == Link::Ramp {
        let Instance::Glm { problem, .. } = &p.instance else { unreachable!() };
        let region = match &p.region {
            FeasibleRegion::WholeSpace => FeasibleRegion::origin_ball(g.dim, auto).map_err(problem_err)?,
            r => r.clone(),
        };
        params.mu = problem.verify_monotone_region(&region, 2000, 200, g.seed).map_err(problem_err)?;
        params.diam = p.params.diam;
        params.ball_g = p.params.ball_g;
        p.params = params;
    }
    Ok(p)
}

/// Builds the configured problem and its constants.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    match &cfg.problem {
        ProblemConfig::Gridworld(g) => {
            let world = gridworld::build(&g.to_spec()).map_err(problem_err)?;
            prepare_policy(&world.mdp, &world.policy, &g.features, cfg)
        }
        ProblemConfig::Mdp(m) => {
            let missing = |p: &Path, field: &str, e: BenchError| match e {
                BenchError::Io { source, .. } => BenchError::config(field, format!("{}: {source}", p.display())),
                other => other,
            };
            let mdp = mdp_io::read_mdp(&m.path).map_err(|e| missing(&m.path, "problem.path", e))?;
            let policy = match &m.policy {
                Some(p) => mdp_io::read_policy(p).map_err(|e| missing(p, "problem.policy", e))?,
                None => Policy::uniform(mdp.n_states(), mdp.n_actions()),
            };
            if (policy.n_states(), policy.n_actions()) != (mdp.n_states(), mdp.n_actions()) {
                return Err(BenchError::config("problem.policy", "shape does not match the MDP"));
            }
            prepare_policy(&mdp, &policy, &m.features, cfg)
        }
        ProblemConfig::Glm(g) => prepare_glm(g, cfg),
    }
}

/// One algorithm with every schedule input fixed.
#[derive(Debug, Clone)]
pub struct ResolvedAlgorithm {
    pub name: String,
    pub kind: ScheduleKind,
    pub schedule: StepSchedule,
    pub params: ProblemParams,
    pub tau: usize,
    pub batch: Option<BatchSpec>,
    pub budget: Budget,
    pub lambda: Option<f64>,
}

impl ResolvedAlgorithm {
    pub fn run_config<'a>(&self, prep: &'a Prepared, seed: u64, trace: TraceConfig) -> RunConfig<'a> {
        let mut rc = RunConfig::new(self.kind.algorithm(), self.schedule, self.params, prep.x1.clone());
        rc.tau = Some(self.tau);
        rc.budget = self.budget;
        rc.region = prep.region.clone();
        rc.batch = self.batch;
        rc.lambda_override = self.lambda;
        rc.trace = trace;
        rc.seed = seed;
        rc
    }

    /// Streams per update at iteration `t`.
    pub fn batch_at(&self, t: u64) -> Result<usize> {
        Ok(match self.batch {
            Some(b) => b.size_at(t),
            None => CompiledSchedule::new(self.schedule, &self.params, self.tau)?.batch_spec().size_at(t),
        })
    }
}

fn need_mixing(prep: &Prepared, field: &str) -> Result<MixingParams> {
    prep.mixing
        .ok_or_else(|| BenchError::config(field, "no mixing estimate available; set tau explicitly"))
}

/// Largest k with k·(k + 1)·τ ≤ budget.
fn robust_horizon(budget: u64, tau: usize) -> u64 {
    let cap = budget / tau.max(1) as u64;
    let mut k = ((cap as f64).sqrt() as u64).max(1);
    while k > 1 && k.saturating_mul(k + 1) > cap {
        k -= 1;
    }
    while (k + 1).saturating_mul(k + 2) <= cap {
        k += 1;
    }
    k
}

fn resolve_one(a: &AlgorithmConfig, i: usize, cfg: &ExperimentConfig, prep: &Prepared) -> Result<ResolvedAlgorithm> {
    let field = |f: &str| format!("algorithms[{i}].{f}");
    let kind = ScheduleKind::parse(a.schedule.as_deref().unwrap_or(&a.name))
        .ok_or_else(|| BenchError::config(field("schedule"), "unknown schedule"))?;
    let mut params = prep.params;
    if let Some(l) = a.lip.or(cfg.lip) {
        params = params.with_lip_override(l);
    }
    let explicit_tau = a.tau.or(cfg.tau);
    let m = a.batch.or(cfg.batch);
    let budget_value = a.budget.unwrap_or(cfg.budget);
    let v1 = bregman(&prep.x1, &prep.x_star)?;
    let collect = |tau: usize| if kind.algorithm() == markov_vi::solvers::Algorithm::Td { 1 } else { tau };
    let per_update = |tau: usize| (collect(tau) * m.unwrap_or(1)) as u64;
    let horizon = |tau: usize| match (a.k, cfg.budget_kind) {
        (Some(k), _) => k,
        (None, BudgetKind::Iterations) => budget_value,
        (None, BudgetKind::Samples) if kind == ScheduleKind::FtdRobust && m.is_none() => {
            robust_horizon(budget_value, collect(tau))
        }
        (None, BudgetKind::Samples) => (budget_value / per_update(tau)).max(1),
    };
    let tau = match (explicit_tau, kind) {
        (Some(t), _) => t,
        (None, ScheduleKind::FtdRobust) => {
            let mix = need_mixing(prep, &field("tau"))?;
            let mut tau = 1;
            for _ in 0..4 {
                let k = horizon(tau);
                let gamma = CompiledSchedule::new(StepSchedule::RobustConstant { k }, &params, 1)
                    .map_err(|e| BenchError::config(field("schedule"), e.to_string()))?
                    .at(2)
                    .gamma;
                tau = robust_tau(gamma, &mix, k);
            }
            tau
        }
        (None, _) => {
            let mix = need_mixing(prep, &field("tau"))?;
            tau_lower_bound(params.mu, &mix).map_err(|e| BenchError::config(field("tau"), e.to_string()))?
        }
    };
    let k = horizon(tau);
    let schedule = match kind {
        ScheduleKind::TdDiminishing => StepSchedule::TdDiminishing,
        ScheduleKind::TdConstant => StepSchedule::TdConstant { k, v1 },
        ScheduleKind::CtdDiminishing => StepSchedule::CtdDiminishing,
        ScheduleKind::CtdConstant => StepSchedule::CtdConstant { k, v1 },
        ScheduleKind::CtdRestart => StepSchedule::CtdRestart { v1 },
        ScheduleKind::FtdDiminishing => StepSchedule::FtdDiminishing,
        ScheduleKind::FtdConstant => StepSchedule::FtdConstant { k, v1 },
        ScheduleKind::FtdRestart => StepSchedule::FtdRestart { v1 },
        ScheduleKind::FtdProjectedWarmup => StepSchedule::FtdProjectedWarmup,
        ScheduleKind::FtdBatchWarmup => StepSchedule::FtdBatchWarmup,
        ScheduleKind::FtdRobust => StepSchedule::RobustConstant { k },
    };
    CompiledSchedule::new(schedule, &params, tau).map_err(|e| BenchError::config(field("schedule"), e.to_string()))?;
    let budget = match (kind, cfg.budget_kind) {
        (ScheduleKind::FtdRobust, BudgetKind::Samples) => {
            let per = collect(tau) as u64 * m.map_or(k + 1, |m| m as u64);
            if k.saturating_mul(per) > budget_value {
                return Err(BenchError::config(field("k"), format!("horizon {k} needs {} samples, budget is {budget_value}", k.saturating_mul(per))));
            }
            Budget::Iterations(k)
        }
        (ScheduleKind::FtdRobust, BudgetKind::Iterations) => Budget::Iterations(k),
        (_, BudgetKind::Samples) => Budget::Samples(budget_value),
        (_, BudgetKind::Iterations) => Budget::Iterations(budget_value),
    };
    Ok(ResolvedAlgorithm {
        name: a.name.clone(),
        kind,
        schedule,
        params,
        tau,
        batch: m.map(BatchSpec::Constant),
        budget,
        lambda: a.lambda,
    })
}

pub fn resolve(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<ResolvedAlgorithm>> {
    cfg.algorithms
        .iter()
        .enumerate()
        .map(|(i, a)| resolve_one(a, i, cfg, prep))
        .collect()
}

/// One trace point of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub iter: u64,
    pub samples: u64,
    pub gamma: f64,
    pub lambda: f64,
    /// Indexed by [`Metric::index`].
    pub metrics: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    /// Ordered by samples consumed.
    pub rows: Vec<Row>,
    pub wall_time: Duration,
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn final_row(&self) -> Option<&Row> {
        self.rows.last()
    }
}

fn row_of(p: &TracePoint) -> Row {
    Row {
        iter: p.t,
        samples: p.samples_consumed,
        gamma: p.gamma_t,
        lambda: p.lambda_t,
        metrics: [p.aux, p.error_to_star, p.residual],
    }
}

fn trace_config(cfg: &ExperimentConfig) -> TraceConfig {
    TraceConfig {
        stride: cfg.trace_stride,
        max_points: cfg.trace_points,
        per_decade: 20,
    }
}

fn execute<O, S, F>(rc: &RunConfig<'_>, op: &O, factory: F) -> std::result::Result<SolverRun, CoreError>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
    F: FnMut(u64, u64) -> S,
{
    run_solver(rc, op, factory)
}

/// Runs one (algorithm, seed) cell; failures are captured in the record.
pub fn run_cell(prep: &Prepared, alg: &ResolvedAlgorithm, seed: u64, cfg: &ExperimentConfig) -> RunRecord {
    let start = Instant::now();
    let wants = |m: Metric| cfg.metrics.contains(&m);
    let mut rc = alg.run_config(prep, seed, trace_config(cfg));
    let (exact, weighted): (Option<&dyn ExactOperator>, Option<&PolicyEvalVi>) = match &prep.instance {
        Instance::Policy(vi) => (Some(vi.as_ref()), Some(vi.as_ref())),
        Instance::Glm { exact, .. } => (exact.as_ref().map(|e| e as &dyn ExactOperator), None),
    };
    let aux_fn = |x: &Point| weighted.and_then(|vi| vi.weighted_error(x).ok()).unwrap_or(f64::NAN);
    rc.monitor = Monitor {
        x_star: wants(Metric::BregmanToStar).then_some(&prep.x_star),
        exact: if wants(Metric::BellmanResidual) { exact } else { None },
        aux: (wants(Metric::WeightedError) && weighted.is_some()).then_some(&aux_fn as &dyn Fn(&Point) -> f64),
    };
    let result = match &prep.instance {
        Instance::Policy(vi) => execute(&rc, vi.as_ref(), |s, i| vi.chain.stationary_stream(s, i)),
        Instance::Glm { problem, .. } => execute(&rc, problem.as_ref(), |s, i| problem.stream(s, i)),
    };
    let (rows, failure) = match result {
        Ok(run) => {
            let mut rows: Vec<Row> = run.trace.iter().map(row_of).collect();
            if alg.kind == ScheduleKind::FtdRobust {
                if let (Some(last), Some((r, x))) = (rows.pop(), run.designated.as_ref()) {
                    let res = match exact {
                        Some(e) if wants(Metric::BellmanResidual) => residual(x, &e.apply(x), &prep.region).ok(),
                        _ => None,
                    };
                    rows.push(Row {
                        iter: *r,
                        samples: last.samples,
                        gamma: last.gamma,
                        lambda: last.lambda,
                        metrics: [rc.monitor.aux.map(|f| f(x)), rc.monitor.x_star.and_then(|xs| bregman(x, xs).ok()), res],
                    });
                }
            }
            (rows, None)
        }
        Err(CoreError::Diverged { t, norm, trace }) => {
            let mut rows: Vec<Row> = trace.iter().map(row_of).collect();
            let samples = rows.last().map_or(0, |r| r.samples);
            let nan = |m: Metric| wants(m).then_some(f64::NAN);
            rows.push(Row {
                iter: t,
                samples,
                gamma: f64::NAN,
                lambda: f64::NAN,
                metrics: [nan(Metric::WeightedError), nan(Metric::BregmanToStar), nan(Metric::BellmanResidual)],
            });
            (rows, Some(format!("diverged at t={t} (norm {norm:e})")))
        }
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    RunRecord {
        algorithm: alg.name.clone(),
        seed,
        rows,
        wall_time: start.elapsed(),
        failure,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the pool default.
    pub workers: Option<usize>,
    /// Print one progress line per cell on stderr.
    pub verbose: bool,
}

pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| r.failure.is_some())
    }
}

/// Runs every (algorithm, seed) cell on a worker pool.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let algs = resolve(cfg, &prep)?;
    let cells: Vec<(usize, u64)> = (0..algs.len())
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::config("workers", e.to_string()))?;
    let mut indexed: Vec<(usize, RunRecord)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, seed)| {
                let rec = run_cell(&prep, &algs[a], seed, cfg);
                if opts.verbose {
                    let status = rec.failure.as_deref().unwrap_or("ok");
                    eprintln!("{} seed {}: {status} in {:.2?}", rec.algorithm, seed, rec.wall_time);
                }
                (a, rec)
            })
            .collect()
    });
    indexed.sort_by_key(|(a, r)| (*a, r.seed));
    let records: Vec<RunRecord> = indexed.into_iter().map(|(_, r)| r).collect();
    let aggregate = aggregate(&records);
    let summary = compare_report(&records);
    Ok(ExperimentOutput { records, aggregate, summary })
}

/// Per-sample-budget statistics across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: String,
    pub samples: u64,
    pub n: usize,
    pub mean: [Option<f64>; 3],
    pub stderr: [Option<f64>; 3],
}

/// Mean and standard error; the latter needs two values.
pub fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Groups successful records by algorithm (first-seen order) and samples.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, u64), Vec<&Row>> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.failure.is_none()) {
        let idx = match order.iter().position(|a| *a == rec.algorithm) {
            Some(i) => i,
            None => {
                order.push(&rec.algorithm);
                order.len() - 1
            }
        };
        for row in &rec.rows {
            groups.entry((idx, row.samples)).or_default().push(row);
        }
    }
    groups
        .into_iter()
        .map(|((idx, samples), rows)| {
            let mut mean = [None; 3];
            let mut stderr = [None; 3];
            for m in 0..3 {
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.metrics[m]).collect();
                if !vals.is_empty() {
                    let (mu, se) = mean_stderr(&vals);
                    mean[m] = Some(mu);
                    stderr[m] = se;
                }
            }
            AggregateRow {
                algorithm: order[idx].to_string(),
                samples,
                n: rows.len(),
                mean,
                stderr,
            }
        })
        .collect()
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

/// Writes one CSV per algorithm, `aggregate.csv`, `summary.csv` and `failures.csv`.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut written = Vec::new();
    let mut names: Vec<&str> = Vec::new();
    for r in &out.records {
        if !names.contains(&r.algorithm.as_str()) {
            names.push(&r.algorithm);
        }
    }
    for name in names {
        let path = dir.join(format!("{}.csv", file_stem(name)));
        let mut w = csv_writer(&path)?;
        w.write_record(RECORD_COLUMNS)?;
        for rec in out.records.iter().filter(|r| r.algorithm == name) {
            for row in &rec.rows {
                w.write_record([
                    rec.algorithm.clone(),
                    rec.seed.to_string(),
                    row.iter.to_string(),
                    row.samples.to_string(),
                    fmt_f64(row.gamma),
                    fmt_f64(row.lambda),
                    fmt_opt(row.metrics[0]),
                    fmt_opt(row.metrics[1]),
                    fmt_opt(row.metrics[2]),
                ])?;
            }
        }
        w.flush().map_err(|e| BenchError::io(&path, e))?;
        written.push(path);
    }

    let path = dir.join("aggregate.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["algorithm".to_string(), "samples".into(), "n".into()];
    for m in Metric::ALL {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_stderr", m.name()));
    }
    w.write_record(&header)?;
    for a in &out.aggregate {
        let mut rec = vec![a.algorithm.clone(), a.samples.to_string(), a.n.to_string()];
        for m in 0..3 {
            rec.push(fmt_opt(a.mean[m]));
            rec.push(fmt_opt(a.stderr[m]));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| BenchError::io(&path, e))?;
    written.push(path);

    let path = dir.join("summary.csv");
    std::fs::write(&path, format_summary(&out.summary)).map_err(|e| BenchError::io(&path, e))?;
    written.push(path);

    let path = dir.join("failures.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["algorithm", "seed", "error"])?;
    for rec in out.failures() {
        w.write_record([rec.algorithm.clone(), rec.seed.to_string(), rec.failure.clone().unwrap_or_default()])?;
    }
    w.flush().map_err(|e| BenchError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Files written by [`write_outputs`] that are not per-algorithm records.
pub const DERIVED_FILES: [&str; 3] = ["aggregate.csv", "summary.csv", "failures.csv"];
