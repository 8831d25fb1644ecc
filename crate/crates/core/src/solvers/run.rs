use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schedule::{CompiledSchedule, RegionRule, StepParams, StepSchedule};
use crate::error::{Error, Result};
use crate::markov::{
    batch_operator, batch_operator_into, robust_tau, tau_lower_bound, BatchSpec, MixingParams,
    SampleStream,
};
use crate::vi_core::{
    bregman, check_dims, check_finite, prox_step_raw, residual, sq_norm, ExactOperator, FeasibleRegion,
    Point, ProblemParams, StochasticOperator,
};

/// Norm above which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// RNG stream reserved for the robust output index.
const OUTPUT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Td,
    Ctd,
    Ftd,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Td => "TD",
            Self::Ctd => "CTD",
            Self::Ftd => "FTD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Samples(u64),
    Iterations(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    /// Number of updates performed; the recorded iterate is `x_{t+1}`.
    pub t: u64,
    pub samples_consumed: u64,
    pub error_to_star: Option<f64>,
    pub residual: Option<f64>,
    pub gamma_t: f64,
    pub lambda_t: f64,
    /// Caller-supplied metric, e.g. a weighted value error.
    pub aux: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub x_curr: Point,
    pub x_prev: Point,
    /// `F̃(x_{t−1}, ξ_{t−1}^τ)`; `None` before the first update.
    pub g_prev: Option<Point>,
    /// Index of `x_curr` (starts at 1).
    pub t: u64,
    pub t_local: u64,
    pub epoch: u32,
    pub samples_consumed: u64,
    pub trace: Vec<TracePoint>,
    /// Metrics of `x_{K_s+1}` at the end of every completed epoch.
    pub epoch_marks: Vec<TracePoint>,
    /// Robust output `(r, x_{r+1})`.
    pub designated: Option<(u64, Point)>,
    pub horizon: Option<u64>,
}

impl SolverRun {
    pub fn new(x1: Point) -> Self {
        Self {
            x_prev: x1.clone(),
            x_curr: x1,
            g_prev: None,
            t: 1,
            t_local: 1,
            epoch: 1,
            samples_consumed: 0,
            trace: Vec::new(),
            epoch_marks: Vec::new(),
            designated: None,
            horizon: None,
        }
    }

    pub fn updates(&self) -> u64 {
        self.t - 1
    }
}

/// Scratch buffers for one update.
#[derive(Debug, Clone)]
pub struct Workspace {
    g: Point,
    scratch: Point,
    dir: Point,
    next: Point,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            g: Point::zeros(dim),
            scratch: Point::zeros(dim),
            dir: Point::zeros(dim),
            next: Point::zeros(dim),
        }
    }
}

/// Shared update: `x_{t+1} = Π(x_t − γ[g_t + λ(g_t − g_{t−1})])`.
#[allow(clippy::too_many_arguments)]
fn update<O, S>(
    run: &mut SolverRun,
    op: &O,
    streams: &mut [S],
    gamma: f64,
    lambda: f64,
    tau: usize,
    region: &FeasibleRegion,
    ws: &mut Workspace,
) -> Result<()>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
{
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be finite and >= 0, got {gamma}"),
        });
    }
    batch_operator_into(op, &run.x_curr, streams, tau, &mut ws.g, &mut ws.scratch)?;
    let extrapolate = lambda != 0.0 && run.g_prev.is_some();
    if extrapolate {
        let g_prev = run.g_prev.as_ref().expect("checked above");
        for ((d, g), gp) in ws.dir.as_mut_slice().iter_mut().zip(ws.g.as_slice()).zip(g_prev.as_slice()) {
            *d = g + lambda * (g - gp);
        }
        prox_step_raw(&run.x_curr, &ws.dir, gamma, region, &mut ws.next);
    } else {
        prox_step_raw(&run.x_curr, &ws.g, gamma, region, &mut ws.next);
    }
    debug_assert!(!region.contains(&run.x_curr) || {
        let dir = if extrapolate { &ws.dir } else { &ws.g };
        let moved = (&ws.next - &run.x_curr).norm();
        !moved.is_finite() || moved <= gamma * dir.norm() * (1.0 + 1e-9) + 1e-12 * (1.0 + run.x_curr.norm())
    });
    core::mem::swap(&mut run.x_prev, &mut run.x_curr);
    core::mem::swap(&mut run.x_curr, &mut ws.next);
    match run.g_prev.as_mut() {
        Some(gp) => core::mem::swap(gp, &mut ws.g),
        None => run.g_prev = Some(ws.g.clone()),
    }
    run.t += 1;
    run.samples_consumed += (tau * streams.len()) as u64;
    Ok(())
}

/// One TD update: a single transition per stream, no skipping.
pub fn td_step<O, S>(
    run: &mut SolverRun,
    op: &O,
    streams: &mut [S],
    gamma: f64,
    region: &FeasibleRegion,
) -> Result<()>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
{
    let mut ws = Workspace::new(op.dim());
    update(run, op, streams, gamma, 0.0, 1, region, &mut ws)?;
    check_finite(&run.x_curr, "iterate")
}

/// One CTD update: each stream skips `tau` transitions and contributes its last sample.
pub fn ctd_step<O, S>(
    run: &mut SolverRun,
    op: &O,
    streams: &mut [S],
    gamma: f64,
    tau: usize,
    region: &FeasibleRegion,
) -> Result<()>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
{
    let mut ws = Workspace::new(op.dim());
    update(run, op, streams, gamma, 0.0, tau, region, &mut ws)?;
    check_finite(&run.x_curr, "iterate")
}

/// One FTD update with operator extrapolation weight `lambda`.
///
/// Before the first update there is no cached operator value, so the
/// extrapolation term vanishes (`x₀ = x₁`).
#[allow(clippy::too_many_arguments)]
pub fn ftd_step<O, S>(
    run: &mut SolverRun,
    op: &O,
    streams: &mut [S],
    gamma: f64,
    lambda: f64,
    tau: usize,
    region: &FeasibleRegion,
) -> Result<()>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
{
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("must be finite and >= 0, got {lambda}"),
        });
    }
    let mut ws = Workspace::new(op.dim());
    update(run, op, streams, gamma, lambda, tau, region, &mut ws)?;
    check_finite(&run.x_curr, "iterate")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceConfig {
    /// Record every `stride` updates until `max_points` points exist.
    pub stride: u64,
    pub max_points: usize,
    /// Points per decade once thinning starts.
    pub per_decade: u32,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            max_points: 1000,
            per_decade: 100,
        }
    }
}

/// Optional references used to evaluate trace metrics.
#[derive(Clone, Copy, Default)]
pub struct Monitor<'a> {
    pub x_star: Option<&'a Point>,
    pub exact: Option<&'a dyn ExactOperator>,
    pub aux: Option<&'a dyn Fn(&Point) -> f64>,
}

impl core::fmt::Debug for Monitor<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Monitor")
            .field("x_star", &self.x_star.is_some())
            .field("exact", &self.exact.is_some())
            .field("aux", &self.aux.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig<'a> {
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub params: ProblemParams,
    /// Skip length; defaults to τ̲ (or the robust condition for `RobustConstant`).
    pub tau: Option<usize>,
    pub budget: Budget,
    pub x1: Point,
    pub region: FeasibleRegion,
    /// Overrides the schedule's own batch rule.
    pub batch: Option<BatchSpec>,
    /// Forces every λ_t to this value.
    pub lambda_override: Option<f64>,
    pub trace: TraceConfig,
    pub seed: u64,
    pub monitor: Monitor<'a>,
}

impl<'a> RunConfig<'a> {
    pub fn new(algorithm: Algorithm, schedule: StepSchedule, params: ProblemParams, x1: Point) -> Self {
        Self {
            algorithm,
            schedule,
            params,
            tau: None,
            budget: Budget::Iterations(0),
            x1,
            region: FeasibleRegion::WholeSpace,
            batch: None,
            lambda_override: None,
            trace: TraceConfig::default(),
            seed: 0,
            monitor: Monitor::default(),
        }
    }

    /// τ used inside the stepsize formulas.
    pub fn resolved_tau(&self) -> Result<usize> {
        if let Some(tau) = self.tau {
            return Ok(tau);
        }
        let mixing = MixingParams::new(self.params.c_mix, self.params.rho_mix)?;
        match self.schedule {
            StepSchedule::RobustConstant { k } => {
                let compiled = CompiledSchedule::new(self.schedule, &self.params, 1)?;
                Ok(robust_tau(compiled.at(2).gamma, &mixing, k))
            }
            _ => tau_lower_bound(self.params.mu, &mixing),
        }
    }

    /// τ used when collecting samples: TD never skips.
    pub fn collect_tau(&self, tau: usize) -> usize {
        match self.algorithm {
            Algorithm::Td => 1,
            _ => tau,
        }
    }
}

struct Tracer {
    cfg: TraceConfig,
    next_log: u64,
}

impl Tracer {
    fn new(cfg: TraceConfig) -> Self {
        Self { cfg, next_log: 0 }
    }

    fn wants(&mut self, t: u64, recorded: usize) -> bool {
        let stride = self.cfg.stride.max(1);
        if recorded < self.cfg.max_points {
            return t % stride == 0;
        }
        if self.next_log == 0 {
            self.next_log = t;
        }
        if t >= self.next_log {
            let factor = libm::pow(10.0, 1.0 / self.cfg.per_decade.max(1) as f64);
            let next = libm::ceil(t as f64 * factor) as u64;
            self.next_log = next.max(t + 1);
            true
        } else {
            false
        }
    }
}

fn measure(run: &SolverRun, monitor: &Monitor<'_>, region: &FeasibleRegion, step: &StepParams, lambda: f64) -> TracePoint {
    let x = &run.x_curr;
    TracePoint {
        t: run.updates(),
        samples_consumed: run.samples_consumed,
        error_to_star: monitor.x_star.and_then(|xs| bregman(x, xs).ok()),
        residual: monitor
            .exact
            .and_then(|op| residual(x, &op.apply(x), region).ok()),
        gamma_t: step.gamma,
        lambda_t: lambda,
        aux: monitor.aux.map(|f| f(x)),
    }
}

/// Run an algorithm under a schedule until the budget is exhausted.
///
/// `make_stream(seed, index)` builds the `index`-th independent sample stream.
pub fn run_solver<O, S, F>(cfg: &RunConfig<'_>, op: &O, mut make_stream: F) -> Result<SolverRun>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
    F: FnMut(u64, u64) -> S,
{
    cfg.params.validate()?;
    check_dims(op.dim(), cfg.x1.len())?;
    check_finite(&cfg.x1, "initial point")?;
    if cfg.schedule.requires_ftd() && cfg.algorithm != Algorithm::Ftd {
        return Err(Error::Config(format!(
            "schedule {} requires algorithm FTD, got {}",
            cfg.schedule.name(),
            cfg.algorithm.name()
        )));
    }
    if let Some(d) = cfg.region.dim() {
        check_dims(op.dim(), d)?;
    }
    if !cfg.region.contains(&cfg.x1) {
        return Err(Error::Config("initial point lies outside the feasible region".into()));
    }
    if let Some(l) = cfg.lambda_override {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be finite and >= 0, got {l}"),
            });
        }
    }
    let tau = cfg.resolved_tau()?;
    let collect = cfg.collect_tau(tau);
    let compiled = CompiledSchedule::new(cfg.schedule, &cfg.params, tau)?;
    let batch = cfg.batch.unwrap_or_else(|| compiled.batch_spec());
    let n_streams = batch.max_size().max(1);
    let mut streams: Vec<S> = (0..n_streams as u64).map(|i| make_stream(cfg.seed, i)).collect();

    let mut run = SolverRun::new(cfg.x1.clone());
    run.horizon = cfg.schedule.horizon();
    let designated_r = match cfg.schedule {
        StepSchedule::RobustConstant { k } if k >= 2 => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(OUTPUT_STREAM);
            Some(rng.gen_range(2..=k))
        }
        _ => None,
    };
    let warm_ball = match cfg.schedule {
        StepSchedule::FtdProjectedWarmup => {
            let g = cfg.params.ball_g.ok_or(Error::MissingParameter {
                field: "ball_g",
                schedule: "FtdProjectedWarmup",
            })?;
            Some(FeasibleRegion::origin_ball(op.dim(), g)?)
        }
        _ => None,
    };

    let mut ws = Workspace::new(op.dim());
    let mut cursor = compiled.cursor();
    let mut tracer = Tracer::new(cfg.trace);
    let mut last = None;
    loop {
        let step = cursor.peek();
        let m = batch.size_at(run.t);
        let cost = (collect as u64).saturating_mul(m as u64);
        let done = match cfg.budget {
            Budget::Iterations(n) => run.updates() >= n,
            Budget::Samples(n) => run.samples_consumed.saturating_add(cost) > n,
        };
        if done {
            break;
        }
        let step = {
            let s = cursor.advance();
            debug_assert_eq!(s, step);
            s
        };
        let lambda = cfg.lambda_override.unwrap_or(step.lambda);
        let region = match (step.region, &warm_ball) {
            (RegionRule::OriginBall { .. }, Some(ball)) => ball,
            _ => &cfg.region,
        };
        let lambda_eff = match cfg.algorithm {
            Algorithm::Ftd => lambda,
            _ => 0.0,
        };
        let result = update(&mut run, op, &mut streams[..m], step.gamma, lambda_eff, collect, region, &mut ws);
        if let Err(e) = result {
            return Err(match e {
                Error::NonFinite(_) => Error::Diverged {
                    t: run.t,
                    norm: f64::NAN,
                    trace: run.trace,
                },
                other => other,
            });
        }
        run.epoch = step.epoch;
        run.t_local = step.t_local;
        let norm = libm::sqrt(sq_norm(run.x_curr.as_slice()));
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Diverged {
                t: run.t,
                norm,
                trace: run.trace,
            });
        }
        if designated_r == Some(run.updates()) {
            run.designated = Some((run.updates(), run.x_curr.clone()));
        }
        let point_needed = tracer.wants(run.updates(), run.trace.len());
        let next = cursor.peek();
        if next.epoch_boundary {
            run.epoch_marks.push(measure(&run, &cfg.monitor, &cfg.region, &step, lambda_eff));
        }
        if point_needed {
            run.trace.push(measure(&run, &cfg.monitor, &cfg.region, &step, lambda_eff));
            last = None;
        } else {
            last = Some((step, lambda_eff));
        }
    }
    if let Some((step, lambda)) = last {
        run.trace.push(measure(&run, &cfg.monitor, &cfg.region, &step, lambda));
    }
    Ok(run)
}

/// The designated robust output `x_{r+1}` and its residual under the exact operator.
pub fn robust_output(
    run: &SolverRun,
    exact: &dyn ExactOperator,
    region: &FeasibleRegion,
) -> Result<(Point, f64)> {
    let x = designated(run)?;
    let res = residual(x, &exact.apply(x), region)?;
    Ok((x.clone(), res))
}

/// As [`robust_output`], estimating `F(x_{r+1})` with one batch over `streams`
/// (at least `k + 1` of them).
pub fn robust_output_stochastic<O, S>(
    run: &SolverRun,
    op: &O,
    streams: &mut [S],
    tau: usize,
    region: &FeasibleRegion,
) -> Result<(Point, f64)>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
{
    let x = designated(run)?;
    let k = run.horizon.unwrap_or(0);
    if (streams.len() as u64) < k + 1 {
        return Err(Error::Config(format!(
            "residual estimate needs at least k+1 = {} streams, got {}",
            k + 1,
            streams.len()
        )));
    }
    let fx = batch_operator(op, x, streams, tau)?;
    let res = residual(x, &fx, region)?;
    Ok((x.clone(), res))
}

fn designated(run: &SolverRun) -> Result<&Point> {
    match run.horizon {
        Some(k) if k >= 2 => {}
        _ => {
            return Err(Error::Config(
                "robust output needs a RobustConstant run with k >= 2".into(),
            ))
        }
    }
    run.designated
        .as_ref()
        .map(|(_, x)| x)
        .ok_or_else(|| Error::Config("run stopped before the designated iterate".into()))
}
