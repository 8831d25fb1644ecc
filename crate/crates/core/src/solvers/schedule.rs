//! Stepsize policies `(γ_t, θ_t, λ_t)` with their epoch, region and batch rules.

use core::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::markov::BatchSpec;
use crate::vi_core::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    TdDiminishing,
    TdConstant { k: u64, v1: f64 },
    CtdDiminishing,
    CtdConstant { k: u64, v1: f64 },
    CtdRestart { v1: f64 },
    FtdDiminishing,
    FtdConstant { k: u64, v1: f64 },
    FtdRestart { v1: f64 },
    FtdProjectedWarmup,
    FtdBatchWarmup,
    RobustConstant { k: u64 },
}

impl StepSchedule {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TdDiminishing => "TdDiminishing",
            Self::TdConstant { .. } => "TdConstant",
            Self::CtdDiminishing => "CtdDiminishing",
            Self::CtdConstant { .. } => "CtdConstant",
            Self::CtdRestart { .. } => "CtdRestart",
            Self::FtdDiminishing => "FtdDiminishing",
            Self::FtdConstant { .. } => "FtdConstant",
            Self::FtdRestart { .. } => "FtdRestart",
            Self::FtdProjectedWarmup => "FtdProjectedWarmup",
            Self::FtdBatchWarmup => "FtdBatchWarmup",
            Self::RobustConstant { .. } => "RobustConstant",
        }
    }

    /// Schedules whose guarantees rely on the extrapolation step.
    pub fn requires_ftd(&self) -> bool {
        matches!(
            self,
            Self::FtdProjectedWarmup | Self::FtdBatchWarmup | Self::RobustConstant { .. }
        )
    }

    pub fn is_restart(&self) -> bool {
        matches!(self, Self::CtdRestart { .. } | Self::FtdRestart { .. })
    }

    /// Horizon `k` for the constant-step variants.
    pub fn horizon(&self) -> Option<u64> {
        match *self {
            Self::TdConstant { k, .. }
            | Self::CtdConstant { k, .. }
            | Self::FtdConstant { k, .. }
            | Self::RobustConstant { k } => Some(k),
            _ => None,
        }
    }
}

/// Region used for an update: the run's base region or a ball around the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionRule {
    Base,
    OriginBall { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub gamma: f64,
    pub theta: f64,
    pub lambda: f64,
    pub region: RegionRule,
    pub batch: usize,
    pub epoch_boundary: bool,
    pub epoch: u32,
    pub t_local: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    /// γ_t = 2/(μ(t+t0−1)), θ_t = (t+t0)(t+t0+1); `extrapolate` selects λ_t.
    Diminishing { t0: f64, extrapolate: bool },
    /// Constant γ with θ_t = base^t and fixed λ.
    Constant { gamma: f64, theta_base: f64, lambda: f64 },
    Restart {
        t0: f64,
        extrapolate: bool,
        len_base: f64,
        len_noise: f64,
    },
    Warmup {
        t0: f64,
        cutoff: u64,
        radius: Option<f64>,
        batch: usize,
    },
}

/// A schedule with its constants resolved against [`ProblemParams`] and τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompiledSchedule {
    pub schedule: StepSchedule,
    mu: f64,
    rule: Rule,
}

fn need_mu(params: &ProblemParams, schedule: &'static str) -> Result<f64> {
    if params.mu > 0.0 {
        Ok(params.mu)
    } else {
        Err(Error::MissingParameter {
            field: "mu",
            schedule,
        })
    }
}

fn need_v1(v1: f64, schedule: &'static str) -> Result<f64> {
    if v1.is_finite() && v1 > 0.0 {
        Ok(v1)
    } else {
        Err(Error::MissingParameter {
            field: "v1",
            schedule,
        })
    }
}

fn need_horizon(k: u64, schedule: &'static str) -> Result<u64> {
    if k >= 1 {
        Ok(k)
    } else {
        Err(Error::MissingParameter {
            field: "k",
            schedule,
        })
    }
}

/// `σ² + ς² D_X²`, requiring D_X only when ς > 0.
fn noise_with_diam(params: &ProblemParams, schedule: &'static str) -> Result<f64> {
    let s2 = params.sigma * params.sigma;
    if params.varsigma == 0.0 {
        return Ok(s2);
    }
    let d = params.diam.ok_or(Error::MissingParameter {
        field: "diam",
        schedule,
    })?;
    Ok(s2 + params.varsigma * params.varsigma * d * d)
}

fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `c · log(k X) / (μ k)` with the logarithm floored at 1, or ∞ when X = ∞.
fn balanced_step(c: f64, k: u64, x: f64, mu: f64) -> f64 {
    let kf = k as f64;
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let log_kx = if x > 0.0 { libm::log(kf * x) } else { f64::NEG_INFINITY };
    c * log_kx.max(1.0) / (mu * kf)
}

const RESTART_SLOPE: f64 = 2.0 * SQRT_2 - 1.0;

impl CompiledSchedule {
    pub fn new(schedule: StepSchedule, params: &ProblemParams, tau: usize) -> Result<Self> {
        params.validate()?;
        if tau == 0 {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: "must be >= 1".into(),
            });
        }
        let name = schedule.name();
        let l = params.lip;
        let lb = params.lip_bar;
        let vs = params.varsigma;
        let sig2 = params.sigma * params.sigma;
        let tau1 = tau as f64 + 1.0;
        let (mu, rule) = match schedule {
            StepSchedule::TdDiminishing => {
                let mu = need_mu(params, name)?;
                let t0 = tau1 * (184.0 * lb * lb + 16.0 * vs * vs) / (3.0 * mu * mu);
                (mu, Rule::Diminishing { t0: libm::ceil(t0), extrapolate: false })
            }
            StepSchedule::TdConstant { k, v1 } => {
                let mu = need_mu(params, name)?;
                let k = need_horizon(k, name)?;
                let g1 = 3.0 * mu / (tau1 * (92.0 * lb * lb + 8.0 * vs * vs));
                let m = td_constant_m(params, g1, tau);
                let fs2 = params.f_star_norm * params.f_star_norm;
                let x = ratio_or_inf(2.0 * mu * mu * m * v1.max(0.0), tau1 * (4.0 * sig2 + 3.0 * fs2));
                let gamma = g1.min(balanced_step(2.0, k, x, mu));
                (mu, Rule::Constant { gamma, theta_base: mu * gamma + 1.0, lambda: 0.0 })
            }
            StepSchedule::CtdDiminishing => {
                let mu = need_mu(params, name)?;
                (mu, Rule::Diminishing { t0: ctd_t0(params, mu), extrapolate: false })
            }
            StepSchedule::CtdConstant { k, v1 } => {
                let mu = need_mu(params, name)?;
                let k = need_horizon(k, name)?;
                let x = ratio_or_inf(mu * mu * v1.max(0.0), sig2);
                let gamma = (mu / (6.0 * l * l))
                    .min(ratio_or_inf(mu, 8.0 * vs * vs))
                    .min(balanced_step(2.0, k, x, mu));
                (mu, Rule::Constant { gamma, theta_base: mu * gamma + 1.0, lambda: 0.0 })
            }
            StepSchedule::CtdRestart { v1 } => {
                let mu = need_mu(params, name)?;
                let t0 = ctd_t0(params, mu);
                let len_noise = if sig2 == 0.0 {
                    0.0
                } else {
                    12.0 * sig2 / (mu * mu * need_v1(v1, name)?)
                };
                let len_base = RESTART_SLOPE * t0 + 4.0;
                (mu, Rule::Restart { t0, extrapolate: false, len_base, len_noise })
            }
            StepSchedule::FtdDiminishing => {
                let mu = need_mu(params, name)?;
                (mu, Rule::Diminishing { t0: libm::ceil(8.0 * l / mu), extrapolate: true })
            }
            StepSchedule::FtdConstant { k, v1 } => {
                let mu = need_mu(params, name)?;
                let k = need_horizon(k, name)?;
                let noise = noise_with_diam(params, name)?;
                let x = ratio_or_inf(mu * mu * v1.max(0.0), noise);
                let gamma = (1.0 / (4.0 * l)).min(balanced_step(1.5, k, x, mu));
                let theta_base = 4.0 * mu * gamma / 3.0 + 1.0;
                let lambda = 3.0 / (4.0 * mu * gamma + 3.0);
                (mu, Rule::Constant { gamma, theta_base, lambda })
            }
            StepSchedule::FtdRestart { v1 } => {
                let mu = need_mu(params, name)?;
                let t0 = libm::ceil(8.0 * l / mu);
                let noise = noise_with_diam(params, name)?;
                let len_noise = if noise == 0.0 {
                    0.0
                } else {
                    80.0 * noise / (mu * mu * need_v1(v1, name)?)
                };
                let len_base = RESTART_SLOPE * t0 + 4.0;
                (mu, Rule::Restart { t0, extrapolate: true, len_base, len_noise })
            }
            StepSchedule::FtdProjectedWarmup => {
                let mu = need_mu(params, name)?;
                let radius = params.ball_g.ok_or(Error::MissingParameter {
                    field: "ball_g",
                    schedule: name,
                })?;
                let raw = (8.0 * l / mu).max(11.0 * vs / mu);
                (mu, Rule::Warmup {
                    t0: libm::ceil(raw),
                    cutoff: ceil_u64(raw * raw),
                    radius: Some(radius),
                    batch: 1,
                })
            }
            StepSchedule::FtdBatchWarmup => {
                let mu = need_mu(params, name)?;
                let raw = (8.0 * l / mu).max(60.0 * vs / mu);
                let batch = ceil_u64(vs / mu).max(1);
                (mu, Rule::Warmup {
                    t0: libm::ceil(raw),
                    cutoff: ceil_u64(raw * raw),
                    radius: None,
                    batch: usize::try_from(batch).unwrap_or(usize::MAX),
                })
            }
            StepSchedule::RobustConstant { k } => {
                let k = need_horizon(k, name)?;
                let _ = k;
                let gamma = (1.0 / (4.0 * l)).min(ratio_or_inf(1.0, 8.0 * SQRT_2 * vs));
                (params.mu, Rule::Constant { gamma, theta_base: 1.0, lambda: 1.0 })
            }
        };
        Ok(Self { schedule, mu, rule })
    }

    /// Length k_s of epoch `s ≥ 1`, `None` for schedules without epochs.
    pub fn epoch_length(&self, s: u32) -> Option<u64> {
        match self.rule {
            Rule::Restart { len_base, len_noise, .. } => {
                let noise = len_noise * libm::pow(2.0, s as f64);
                Some(ceil_u64(len_base.max(noise)).max(1))
            }
            _ => None,
        }
    }

    /// The schedule's own batch rule.
    pub fn batch_spec(&self) -> BatchSpec {
        match (self.rule, self.schedule) {
            (_, StepSchedule::RobustConstant { k }) => BatchSpec::HorizonBatch { k },
            (Rule::Warmup { cutoff, batch, radius: None, .. }, _) => BatchSpec::WarmupThenOne {
                m: batch,
                cutoff_iters: cutoff,
            },
            _ => BatchSpec::Constant(1),
        }
    }

    /// Warmup cutoff ⌈t0²⌉ where applicable.
    pub fn warmup_cutoff(&self) -> Option<u64> {
        match self.rule {
            Rule::Warmup { cutoff, .. } => Some(cutoff),
            _ => None,
        }
    }

    /// Evaluate at global index `t` given its epoch and local index.
    pub fn local(&self, t: u64, epoch: u32, t_local: u64) -> StepParams {
        let mu = self.mu;
        let dim = |t0: f64, tt: f64| 2.0 / (mu * (tt + t0 - 1.0));
        let theta_d = |t0: f64, tt: f64| (tt + t0) * (tt + t0 + 1.0);
        let lambda_d = |t0: f64, tt: u64| {
            if tt <= 1 {
                0.0
            } else {
                let (a, b) = (tt as f64 - 1.0, tt as f64);
                (theta_d(t0, a) * dim(t0, a)) / (theta_d(t0, b) * dim(t0, b))
            }
        };
        let mut out = StepParams {
            gamma: 0.0,
            theta: 0.0,
            lambda: 0.0,
            region: RegionRule::Base,
            batch: self.batch_spec().size_at(t),
            epoch_boundary: false,
            epoch,
            t_local,
        };
        let tf = t as f64;
        match self.rule {
            Rule::Diminishing { t0, extrapolate } => {
                out.gamma = dim(t0, tf);
                out.theta = theta_d(t0, tf);
                if extrapolate {
                    out.lambda = lambda_d(t0, t);
                }
            }
            Rule::Constant { gamma, theta_base, lambda } => {
                out.gamma = gamma;
                out.theta = libm::pow(theta_base, tf);
                out.lambda = if t <= 1 { 0.0 } else { lambda };
            }
            Rule::Restart { t0, extrapolate, .. } => {
                let tl = t_local as f64;
                out.gamma = dim(t0, tl);
                out.theta = theta_d(t0, tl);
                if extrapolate {
                    out.lambda = lambda_d(t0, t_local);
                }
                out.epoch_boundary = t_local == 1 && t > 1;
            }
            Rule::Warmup { t0, cutoff, radius, .. } => {
                out.gamma = dim(t0, tf);
                out.theta = theta_d(t0, tf);
                out.lambda = lambda_d(t0, t);
                // The update at t lands in X_{t+1}.
                if let Some(radius) = radius {
                    if t < cutoff {
                        out.region = RegionRule::OriginBall { radius };
                    }
                }
            }
        }
        out
    }

    /// Evaluate at global index `t ≥ 1`, locating its epoch.
    pub fn at(&self, t: u64) -> StepParams {
        let (epoch, t_local) = self.locate(t);
        self.local(t, epoch, t_local)
    }

    fn locate(&self, t: u64) -> (u32, u64) {
        let mut rest = t.max(1);
        let mut s = 1u32;
        while let Some(len) = self.epoch_length(s) {
            if rest <= len {
                break;
            }
            rest -= len;
            s += 1;
        }
        (s, rest)
    }

    pub fn cursor(&self) -> ScheduleCursor<'_> {
        ScheduleCursor {
            schedule: self,
            t: 0,
            epoch: 1,
            t_local: 0,
            epoch_len: self.epoch_length(1),
        }
    }
}

/// Sequential evaluation without re-locating epochs at every step.
#[derive(Debug, Clone)]
pub struct ScheduleCursor<'a> {
    schedule: &'a CompiledSchedule,
    t: u64,
    epoch: u32,
    t_local: u64,
    epoch_len: Option<u64>,
}

impl ScheduleCursor<'_> {
    /// Parameters for the next global index.
    pub fn advance(&mut self) -> StepParams {
        self.t += 1;
        self.t_local += 1;
        if let Some(len) = self.epoch_len {
            if self.t_local > len {
                self.epoch += 1;
                self.t_local = 1;
                self.epoch_len = self.schedule.epoch_length(self.epoch);
            }
        }
        self.schedule.local(self.t, self.epoch, self.t_local)
    }

    /// Parameters the next call to [`advance`](Self::advance) would return.
    pub fn peek(&self) -> StepParams {
        self.clone().advance()
    }
}

/// Pure evaluation of a schedule at `t ≥ 1`.
pub fn schedule_eval(
    schedule: &StepSchedule,
    t: u64,
    params: &ProblemParams,
    tau: usize,
) -> Result<StepParams> {
    if t == 0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "iteration index starts at 1".into(),
        });
    }
    Ok(CompiledSchedule::new(*schedule, params, tau)?.at(t))
}

fn ctd_t0(params: &ProblemParams, mu: f64) -> f64 {
    let l = params.lip;
    let vs = params.varsigma;
    libm::ceil((8.0 * l * l / (mu * mu)).max(16.0 * vs * vs / (mu * mu)))
}

/// `M = 1 + 2 γC Σ_{i<τ}(θρ)^i + 4L̄²(θ^{τ+1} − 1)/μ²` with θ = 1 + μγ.
fn td_constant_m(params: &ProblemParams, gamma: f64, tau: usize) -> f64 {
    let theta = 1.0 + params.mu * gamma;
    let q = theta * params.rho_mix;
    let geo = if (q - 1.0).abs() < 1e-12 {
        tau as f64
    } else {
        (libm::pow(q, tau as f64) - 1.0) / (q - 1.0)
    };
    let mu2 = params.mu * params.mu;
    1.0 + 2.0 * geo * gamma * params.c_mix
        + 4.0 * params.lip_bar * params.lip_bar * (libm::pow(theta, tau as f64 + 1.0) - 1.0) / mu2
}

fn ceil_u64(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        0
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        libm::ceil(x) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(mu: f64, l: f64) -> ProblemParams {
        ProblemParams::deterministic(mu, l)
    }

    #[test]
    fn ctd_diminishing_example() {
        let s = schedule_eval(&StepSchedule::CtdDiminishing, 1, &p(0.5, 1.0), 1).unwrap();
        assert_eq!(s.gamma, 0.125);
        assert_eq!(s.lambda, 0.0);
    }

    #[test]
    fn ftd_lambda_two_with_t0_eight() {
        // t0 = 8L/μ = 8.
        let s = schedule_eval(&StepSchedule::FtdDiminishing, 2, &p(0.25, 0.25), 1).unwrap();
        assert!((s.lambda - 0.9205).abs() < 5e-5);
        let first = schedule_eval(&StepSchedule::FtdDiminishing, 1, &p(0.25, 0.25), 1).unwrap();
        assert_eq!(first.lambda, 0.0);
        assert_eq!(first.gamma, 1.0);
    }

    #[test]
    fn robust_gamma_branches() {
        let s = StepSchedule::RobustConstant { k: 10 };
        assert_eq!(schedule_eval(&s, 3, &p(0.0, 1.0), 1).unwrap().gamma, 0.25);
        let mut q = p(0.0, 1.0);
        q.varsigma = 10.0;
        let g = schedule_eval(&s, 3, &q, 1).unwrap().gamma;
        assert!((g - 1.0 / (80.0 * SQRT_2)).abs() < 1e-15);
        let st = schedule_eval(&s, 3, &q, 1).unwrap();
        assert_eq!((st.theta, st.lambda, st.batch), (1.0, 1.0, 11));
        assert_eq!(schedule_eval(&s, 1, &q, 1).unwrap().lambda, 0.0);
    }

    #[test]
    fn restart_noise_free_epochs_are_constant() {
        let c = CompiledSchedule::new(StepSchedule::CtdRestart { v1: 1.0 }, &p(0.5, 1.0), 1).unwrap();
        let expect = libm::ceil(RESTART_SLOPE * 32.0 + 4.0) as u64;
        for s in 1..10 {
            assert_eq!(c.epoch_length(s), Some(expect));
        }
    }

    #[test]
    fn restart_epochs_double_under_noise() {
        let mut q = p(0.5, 1.0);
        q.sigma = 10.0;
        let c = CompiledSchedule::new(StepSchedule::CtdRestart { v1: 1.0 }, &q, 1).unwrap();
        // 12·2^s·σ²/(μ²V₁) = 4800·2^s dominates.
        assert_eq!(c.epoch_length(1), Some(9600));
        assert_eq!(c.epoch_length(3), Some(38400));
    }

    #[test]
    fn restart_local_matches_diminishing() {
        let q = p(0.2, 1.0);
        let r = CompiledSchedule::new(StepSchedule::FtdRestart { v1: 1.0 }, &q, 1).unwrap();
        let d = CompiledSchedule::new(StepSchedule::FtdDiminishing, &q, 1).unwrap();
        let k1 = r.epoch_length(1).unwrap();
        for tl in 1..=k1 {
            let a = r.at(k1 + tl);
            let b = d.at(tl);
            assert_eq!((a.gamma, a.theta, a.lambda), (b.gamma, b.theta, b.lambda));
            assert_eq!(a.epoch, 2);
            assert_eq!(a.epoch_boundary, tl == 1);
        }
        assert!(!r.at(1).epoch_boundary);
    }

    #[test]
    fn cursor_matches_pure_eval() {
        let mut q = p(0.3, 1.0);
        q.sigma = 0.5;
        for s in [
            StepSchedule::CtdRestart { v1: 2.0 },
            StepSchedule::FtdRestart { v1: 2.0 },
            StepSchedule::FtdDiminishing,
            StepSchedule::CtdConstant { k: 100, v1: 2.0 },
        ] {
            let c = CompiledSchedule::new(s, &q, 3).unwrap();
            let mut cur = c.cursor();
            for t in 1..3000 {
                assert_eq!(cur.peek(), c.at(t));
                assert_eq!(cur.advance(), c.at(t));
            }
        }
    }

    #[test]
    fn missing_parameters_are_named() {
        let mut q = p(0.5, 1.0);
        q.varsigma = 0.1;
        let e = CompiledSchedule::new(StepSchedule::FtdConstant { k: 10, v1: 1.0 }, &q, 1).unwrap_err();
        assert_eq!(e, Error::MissingParameter { field: "diam", schedule: "FtdConstant" });
        let e = CompiledSchedule::new(StepSchedule::FtdProjectedWarmup, &q, 1).unwrap_err();
        assert_eq!(e, Error::MissingParameter { field: "ball_g", schedule: "FtdProjectedWarmup" });
        let e = CompiledSchedule::new(StepSchedule::CtdDiminishing, &p(0.0, 1.0), 1).unwrap_err();
        assert_eq!(e, Error::MissingParameter { field: "mu", schedule: "CtdDiminishing" });
        q.sigma = 1.0;
        let e = CompiledSchedule::new(StepSchedule::CtdRestart { v1: 0.0 }, &q, 1).unwrap_err();
        assert_eq!(e, Error::MissingParameter { field: "v1", schedule: "CtdRestart" });
        assert!(schedule_eval(&StepSchedule::CtdDiminishing, 0, &p(0.5, 1.0), 1).is_err());
    }

    #[test]
    fn warmups() {
        let mut q = p(0.1, 0.2);
        q.varsigma = 0.05;
        q.ball_g = Some(3.0);
        // raw t0 = max(16, 5.5) = 16, cutoff 256.
        let c = CompiledSchedule::new(StepSchedule::FtdProjectedWarmup, &q, 1).unwrap();
        assert_eq!(c.warmup_cutoff(), Some(256));
        assert_eq!(c.at(255).region, RegionRule::OriginBall { radius: 3.0 });
        assert_eq!(c.at(256).region, RegionRule::Base);
        // ς = 0.25: raw t0 = 150, m = ⌈2.5⌉ = 3.
        q.varsigma = 0.25;
        let c = CompiledSchedule::new(StepSchedule::FtdBatchWarmup, &q, 1).unwrap();
        assert_eq!(c.warmup_cutoff(), Some(22500));
        assert_eq!(c.at(1).batch, 3);
        assert_eq!(c.at(22500).batch, 3);
        assert_eq!(c.at(22501).batch, 1);
        assert_eq!(c.at(2).gamma, 2.0 / (0.1 * 151.0));
    }

    #[test]
    fn td_formulas() {
        let mut q = p(0.5, 1.0);
        q.lip_bar = 2.0;
        q.varsigma = 1.0;
        // t0 = 3·(184·4 + 16)/(3·0.25) = 3008.
        let s = schedule_eval(&StepSchedule::TdDiminishing, 1, &q, 2).unwrap();
        assert_eq!(s.gamma, 2.0 / (0.5 * 3008.0));
        // Noise-free: only the first branch binds.
        let s = schedule_eval(&StepSchedule::TdConstant { k: 100, v1: 1.0 }, 5, &q, 2).unwrap();
        assert_eq!(s.gamma, 1.5 / (3.0 * (92.0 * 4.0 + 8.0)));
    }

    #[test]
    fn constant_steps_balance_noise() {
        let mut q = p(0.5, 1.0);
        q.sigma = 1.0;
        let k = 10_000;
        let s = schedule_eval(&StepSchedule::CtdConstant { k, v1: 4.0 }, 1, &q, 1).unwrap();
        let expect = 2.0 * libm::log(k as f64 * 0.25 * 4.0) / (0.5 * k as f64);
        assert!((s.gamma - expect).abs() < 1e-15);
        q.diam = Some(1.0);
        let s = schedule_eval(&StepSchedule::FtdConstant { k, v1: 4.0 }, 2, &q, 1).unwrap();
        let expect = 1.5 * libm::log(k as f64) / (0.5 * k as f64);
        assert!((s.gamma - expect).abs() < 1e-15);
        assert!((s.lambda - 3.0 / (4.0 * 0.5 * expect + 3.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ftd_schedule_identities(mu in 1e-3f64..1.0, ratio in 1.0f64..50.0, t in 2u64..10_000) {
            let q = p(mu, mu * ratio);
            for s in [StepSchedule::FtdDiminishing, StepSchedule::FtdRestart { v1: 1.0 }] {
                let c = CompiledSchedule::new(s, &q, 1).unwrap();
                let prev = c.at(t - 1);
                let cur = c.at(t);
                if cur.t_local == 1 {
                    prop_assert_eq!(cur.lambda, 0.0);
                    continue;
                }
                let lhs = prev.theta * prev.gamma;
                let rhs = cur.theta * cur.gamma * cur.lambda;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
                let l = q.lip;
                prop_assert!(16.0 * l * l * cur.gamma * cur.gamma * cur.lambda * cur.lambda * cur.theta
                             <= prev.theta * (1.0 + 1e-12));
            }
        }

        #[test]
        fn schedules_are_positive(mu in 1e-3f64..1.0, ratio in 1.0f64..20.0, t in 1u64..5000,
                                  sigma in 0.0f64..2.0, vs in 0.0f64..2.0) {
            let mut q = p(mu, mu * ratio);
            q.sigma = sigma;
            q.varsigma = vs;
            q.diam = Some(2.0);
            q.ball_g = Some(1.0);
            for s in [
                StepSchedule::TdDiminishing, StepSchedule::TdConstant { k: 500, v1: 1.0 },
                StepSchedule::CtdDiminishing, StepSchedule::CtdConstant { k: 500, v1: 1.0 },
                StepSchedule::CtdRestart { v1: 1.0 }, StepSchedule::FtdDiminishing,
                StepSchedule::FtdConstant { k: 500, v1: 1.0 }, StepSchedule::FtdRestart { v1: 1.0 },
                StepSchedule::FtdProjectedWarmup, StepSchedule::FtdBatchWarmup,
                StepSchedule::RobustConstant { k: 500 },
            ] {
                let st = schedule_eval(&s, t, &q, 4).unwrap();
                prop_assert!(st.gamma > 0.0 && st.gamma.is_finite());
                prop_assert!(st.lambda >= 0.0);
                prop_assert!(st.batch >= 1);
            }
        }
    }
}
