use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::markov::{BatchSpec, SampleStream, UnitStream};
use crate::vi_core::{AffineOperator, FeasibleRegion, Noiseless, Point, ProblemParams, StochasticOperator};

fn v(xs: &[f64]) -> Point {
    Point::from_column_slice(xs)
}

fn identity_op(n: usize) -> Noiseless<AffineOperator> {
    Noiseless(AffineOperator::new(DMatrix::identity(n, n), Point::zeros(n)).unwrap())
}

/// F̃(x, ξ) = x − ξ with ξ = ±1 equiprobable.
struct SignShift;

impl StochasticOperator for SignShift {
    type Sample = f64;
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &Point, s: &f64, out: &mut Point) {
        out[0] = x[0] - s;
    }
}

struct Signs(ChaCha8Rng);

impl SampleStream for Signs {
    type Sample = f64;
    fn next_sample(&mut self) -> f64 {
        if self.0.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

fn signs(seed: u64, index: u64) -> Signs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Signs(rng)
}

#[test]
fn td_step_examples() {
    let op = identity_op(1);
    let mut run = SolverRun::new(v(&[1.0]));
    td_step(&mut run, &op, &mut [UnitStream], 0.5, &FeasibleRegion::WholeSpace).unwrap();
    assert_eq!(run.x_curr, v(&[0.5]));
    let mut run = SolverRun::new(v(&[1.0]));
    td_step(&mut run, &op, &mut [UnitStream], 0.0, &FeasibleRegion::WholeSpace).unwrap();
    assert_eq!(run.x_curr, v(&[1.0]));
    for seed in 0..20 {
        let mut run = SolverRun::new(v(&[0.0]));
        td_step(&mut run, &SignShift, &mut [signs(seed, 0)], 0.1, &FeasibleRegion::WholeSpace)
            .unwrap();
        assert!(run.x_curr[0] == 0.1 || run.x_curr[0] == -0.1);
    }
}

#[test]
fn ctd_accounting_and_noise_free_equivalence() {
    let op = identity_op(2);
    let mut a = SolverRun::new(v(&[1.0, -2.0]));
    let mut b = a.clone();
    let mut streams = [UnitStream, UnitStream, UnitStream];
    for _ in 0..5 {
        ctd_step(&mut a, &op, &mut streams, 0.3, 4, &FeasibleRegion::WholeSpace).unwrap();
        td_step(&mut b, &op, &mut [UnitStream], 0.3, &FeasibleRegion::WholeSpace).unwrap();
    }
    assert_eq!(a.x_curr, b.x_curr);
    assert_eq!(a.samples_consumed, 5 * 4 * 3);
}

#[test]
fn ftd_extrapolated_step_example() {
    let op = identity_op(1);
    let mut run = SolverRun::new(v(&[1.0]));
    run.x_prev = v(&[2.0]);
    run.g_prev = Some(v(&[2.0]));
    run.t = 2;
    ftd_step(&mut run, &op, &mut [UnitStream], 0.25, 1.0, 1, &FeasibleRegion::WholeSpace).unwrap();
    assert_eq!(run.x_curr, v(&[1.0]));
    assert_eq!(run.g_prev, Some(v(&[1.0])));
}

#[test]
fn ftd_first_step_has_no_extrapolation() {
    let op = identity_op(1);
    let mut a = SolverRun::new(v(&[1.0]));
    let mut b = a.clone();
    ftd_step(&mut a, &op, &mut [UnitStream], 0.25, 5.0, 1, &FeasibleRegion::WholeSpace).unwrap();
    ctd_step(&mut b, &op, &mut [UnitStream], 0.25, 1, &FeasibleRegion::WholeSpace).unwrap();
    assert_eq!(a.x_curr, b.x_curr);
}

fn base_config(schedule: StepSchedule, algorithm: Algorithm) -> RunConfig<'static> {
    let mut cfg = RunConfig::new(algorithm, schedule, ProblemParams::deterministic(0.5, 1.0), v(&[1.0]));
    cfg.tau = Some(1);
    cfg
}

#[test]
fn zero_budget_is_noop() {
    let cfg = base_config(StepSchedule::FtdDiminishing, Algorithm::Ftd);
    let run = run_solver(&cfg, &identity_op(1), |_, _| UnitStream).unwrap();
    assert_eq!(run.x_curr, v(&[1.0]));
    assert!(run.trace.is_empty());
    assert_eq!(run.samples_consumed, 0);
}

#[test]
fn sample_budget_is_respected() {
    let mut cfg = base_config(StepSchedule::CtdDiminishing, Algorithm::Ctd);
    cfg.tau = Some(3);
    cfg.batch = Some(BatchSpec::Constant(2));
    cfg.budget = Budget::Samples(20);
    let run = run_solver(&cfg, &SignShift, signs).unwrap();
    assert_eq!(run.samples_consumed, 18);
    assert_eq!(run.updates(), 3);
    let samples: Vec<u64> = run.trace.iter().map(|p| p.samples_consumed).collect();
    assert_eq!(samples, vec![6, 12, 18]);
}

#[test]
fn robust_requires_ftd() {
    let cfg = base_config(StepSchedule::RobustConstant { k: 10 }, Algorithm::Ctd);
    let err = run_solver(&cfg, &identity_op(1), |_, _| UnitStream).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn divergence_is_reported() {
    let a = DMatrix::from_element(1, 1, -1.0);
    let op = Noiseless(AffineOperator::new(a, Point::zeros(1)).unwrap());
    let mut cfg = base_config(StepSchedule::RobustConstant { k: 1000 }, Algorithm::Ftd);
    cfg.params = ProblemParams::deterministic(0.0, 1.0);
    cfg.budget = Budget::Iterations(1000);
    cfg.batch = Some(BatchSpec::Constant(1));
    let err = run_solver(&cfg, &op, |_, _| UnitStream).unwrap_err();
    match err {
        Error::Diverged { norm, trace, .. } => {
            assert!(norm > DIVERGENCE_NORM);
            assert!(!trace.is_empty());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn robust_output_index_and_residual() {
    let op = AffineOperator::new(DMatrix::identity(1, 1), Point::zeros(1)).unwrap();
    let mut cfg = base_config(StepSchedule::RobustConstant { k: 2 }, Algorithm::Ftd);
    cfg.params = ProblemParams::deterministic(0.0, 1.0);
    cfg.budget = Budget::Iterations(2);
    let run = run_solver(&cfg, &Noiseless(op.clone()), |_, _| UnitStream).unwrap();
    assert_eq!(run.designated.as_ref().unwrap().0, 2);
    let (x, res) = robust_output(&run, &op, &FeasibleRegion::WholeSpace).unwrap();
    assert_eq!(x, run.x_curr);
    assert_eq!(res, x[0].abs());

    let mut at_star = run.clone();
    at_star.designated = Some((2, Point::zeros(1)));
    assert_eq!(robust_output(&at_star, &op, &FeasibleRegion::WholeSpace).unwrap().1, 0.0);

    let mut short = run.clone();
    short.horizon = Some(1);
    assert!(robust_output(&short, &op, &FeasibleRegion::WholeSpace).is_err());
    let mut streams = [UnitStream, UnitStream];
    assert!(robust_output_stochastic(&run, &Noiseless(op.clone()), &mut streams, 1, &FeasibleRegion::WholeSpace).is_err());
    let mut streams = [UnitStream, UnitStream, UnitStream];
    let (_, r2) = robust_output_stochastic(&run, &Noiseless(op), &mut streams, 1, &FeasibleRegion::WholeSpace).unwrap();
    assert_eq!(r2, res);
}

#[test]
fn robust_index_is_uniform_over_support() {
    let op = identity_op(1);
    let mut seen = [0usize; 6];
    for seed in 0..600 {
        let mut cfg = base_config(StepSchedule::RobustConstant { k: 5 }, Algorithm::Ftd);
        cfg.params = ProblemParams::deterministic(0.0, 1.0);
        cfg.budget = Budget::Iterations(5);
        cfg.seed = seed;
        let run = run_solver(&cfg, &op, |_, _| UnitStream).unwrap();
        seen[run.designated.unwrap().0 as usize] += 1;
    }
    assert_eq!(seen[0] + seen[1], 0);
    for count in &seen[2..] {
        assert!(*count > 100 && *count < 200, "{seen:?}");
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let mut cfg = base_config(StepSchedule::FtdDiminishing, Algorithm::Ftd);
    cfg.tau = Some(2);
    cfg.budget = Budget::Iterations(500);
    cfg.seed = 42;
    let a = run_solver(&cfg, &SignShift, signs).unwrap();
    let b = run_solver(&cfg, &SignShift, signs).unwrap();
    assert_eq!(a, b);
    cfg.seed = 43;
    let c = run_solver(&cfg, &SignShift, signs).unwrap();
    assert_ne!(a.x_curr, c.x_curr);
}

#[test]
fn trace_thins_logarithmically() {
    let mut cfg = base_config(StepSchedule::CtdDiminishing, Algorithm::Ctd);
    cfg.budget = Budget::Iterations(100_000);
    cfg.trace = TraceConfig { stride: 1, max_points: 100, per_decade: 10 };
    let run = run_solver(&cfg, &identity_op(1), |_, _| UnitStream).unwrap();
    let ts: Vec<u64> = run.trace.iter().map(|p| p.t).collect();
    assert_eq!(&ts[..100], &(1..=100).collect::<Vec<_>>()[..]);
    assert_eq!(*ts.last().unwrap(), 100_000);
    assert!(ts.len() < 100 + 40);
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn projected_warmup_uses_origin_ball() {
    let op = identity_op(1);
    let mut params = ProblemParams::deterministic(0.5, 1.0);
    params.ball_g = Some(0.5);
    let mut cfg = base_config(StepSchedule::FtdProjectedWarmup, Algorithm::Ftd);
    cfg.params = params;
    cfg.x1 = v(&[-3.0]);
    cfg.budget = Budget::Iterations(1);
    let run = run_solver(&cfg, &op, |_, _| UnitStream).unwrap();
    assert!(run.x_curr[0].abs() <= 0.5 + 1e-15);
}

#[test]
fn epoch_marks_follow_epoch_lengths() {
    let op = identity_op(1);
    let mut cfg = base_config(StepSchedule::CtdRestart { v1: 0.5 }, Algorithm::Ctd);
    let compiled = CompiledSchedule::new(cfg.schedule, &cfg.params, 1).unwrap();
    let k1 = compiled.epoch_length(1).unwrap();
    cfg.budget = Budget::Iterations(3 * k1);
    let run = run_solver(&cfg, &op, |_, _| UnitStream).unwrap();
    let marks: Vec<u64> = run.epoch_marks.iter().map(|p| p.t).collect();
    assert_eq!(marks, vec![k1, 2 * k1, 3 * k1]);
}

#[test]
fn lambda_override_and_algorithm_masking() {
    let mut cfg = base_config(StepSchedule::FtdDiminishing, Algorithm::Ftd);
    cfg.tau = Some(2);
    cfg.budget = Budget::Iterations(200);
    cfg.seed = 7;
    cfg.lambda_override = Some(0.0);
    let ftd = run_solver(&cfg, &SignShift, signs).unwrap();
    cfg.algorithm = Algorithm::Ctd;
    cfg.lambda_override = None;
    let ctd = run_solver(&cfg, &SignShift, signs).unwrap();
    assert_eq!(ftd.x_curr, ctd.x_curr);
    assert!(ctd.trace.iter().all(|p| p.lambda_t == 0.0));
}
