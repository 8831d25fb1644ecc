//! Markovian sampling: sample streams, skip-τ collection, independent-stream
//! mini-batches, the τ̲ formula and empirical bias probes.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vi_core::{check_dims, ExactOperator, Point, StochasticOperator};

/// Generator for stream `index` of the run seeded by `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A seeded, single-owner Markov chain emitting one sample per transition.
pub trait SampleStream {
    type Sample;
    fn next_sample(&mut self) -> Self::Sample;
}

impl<S: SampleStream + ?Sized> SampleStream for &mut S {
    type Sample = S::Sample;
    fn next_sample(&mut self) -> Self::Sample {
        (**self).next_sample()
    }
}

/// Stream producing unit samples, for noise-free operators.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitStream;

impl SampleStream for UnitStream {
    type Sample = ();
    fn next_sample(&mut self) {}
}

/// Geometric bias bound `‖F(x) − E[F̃(x, ξ_{t+τ}) | F_{t−1}]‖ ≤ C ρ^τ ‖x − x*‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingParams {
    pub c_mix: f64,
    pub rho_mix: f64,
}

impl MixingParams {
    pub fn new(c_mix: f64, rho_mix: f64) -> Result<Self> {
        if !(c_mix.is_finite() && c_mix > 0.0) {
            return Err(Error::InvalidParameter {
                name: "c_mix",
                reason: format!("must be finite and > 0, got {c_mix}"),
            });
        }
        if !(rho_mix > 0.0 && rho_mix < 1.0) {
            return Err(Error::InvalidParameter {
                name: "rho_mix",
                reason: format!("must lie in (0, 1), got {rho_mix}"),
            });
        }
        Ok(Self { c_mix, rho_mix })
    }
}

/// How many independent streams feed each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSpec {
    Constant(usize),
    /// `m` streams while `t ≤ cutoff_iters`, one afterwards.
    WarmupThenOne { m: usize, cutoff_iters: u64 },
    /// `k + 1` streams for a horizon of `k` iterations.
    HorizonBatch { k: u64 },
}

impl BatchSpec {
    pub fn size_at(&self, t: u64) -> usize {
        match *self {
            Self::Constant(m) => m.max(1),
            Self::WarmupThenOne { m, cutoff_iters } => {
                if t <= cutoff_iters {
                    m.max(1)
                } else {
                    1
                }
            }
            Self::HorizonBatch { k } => (k as usize).saturating_add(1),
        }
    }

    pub fn max_size(&self) -> usize {
        match *self {
            Self::WarmupThenOne { cutoff_iters: 0, .. } => 1,
            _ => self.size_at(1),
        }
    }
}

/// τ̲ = ⌈(log(1/μ) + log(9C)) / log(1/ρ)⌉, clamped to at least 1.
pub fn tau_lower_bound(mu: f64, params: &MixingParams) -> Result<usize> {
    if mu == 0.0 {
        return Err(Error::RobustNeedsTau);
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: format!("must be finite and > 0, got {mu}"),
        });
    }
    let MixingParams { c_mix, rho_mix } = MixingParams::new(params.c_mix, params.rho_mix)?;
    let raw = (libm::log(1.0 / mu) + libm::log(9.0 * c_mix)) / libm::log(1.0 / rho_mix);
    Ok(ceil_to_count(raw))
}

/// Smallest τ with `ρ^τ ≤ 1/(16 γ C (k+1))`, clamped to at least 1.
pub fn robust_tau(gamma: f64, params: &MixingParams, k: u64) -> usize {
    let raw = libm::log(16.0 * gamma * params.c_mix * (k as f64 + 1.0))
        / libm::log(1.0 / params.rho_mix);
    ceil_to_count(raw)
}

fn ceil_to_count(raw: f64) -> usize {
    if raw.is_nan() || raw <= 1.0 {
        1
    } else if raw >= usize::MAX as f64 {
        usize::MAX
    } else {
        libm::ceil(raw) as usize
    }
}

/// Advance the chain `tau` transitions and return the last sample.
///
/// # Panics
/// If `tau == 0`.
pub fn skip_collect<S: SampleStream + ?Sized>(stream: &mut S, tau: usize) -> S::Sample {
    assert!(tau >= 1, "skip_collect needs tau >= 1");
    for _ in 1..tau {
        let _ = stream.next_sample();
    }
    stream.next_sample()
}

/// Mean of `F̃(x, ξ^τ_{(i)})` over the streams, written into `out`.
///
/// `scratch` must have the operator dimension; it is overwritten.
pub fn batch_operator_into<O, S>(
    op: &O,
    x: &Point,
    streams: &mut [S],
    tau: usize,
    out: &mut Point,
    scratch: &mut Point,
) -> Result<()>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
{
    check_dims(op.dim(), x.len())?;
    check_dims(op.dim(), out.len())?;
    let (first, rest) = streams.split_first_mut().ok_or(Error::EmptyBatch)?;
    let sample = skip_collect(first, tau);
    op.eval_into(x, &sample, out);
    if rest.is_empty() {
        return Ok(());
    }
    check_dims(op.dim(), scratch.len())?;
    for stream in rest {
        let sample = skip_collect(stream, tau);
        op.eval_into(x, &sample, scratch);
        *out += &*scratch;
    }
    *out /= streams.len() as f64;
    Ok(())
}

/// Allocating variant of [`batch_operator_into`].
pub fn batch_operator<O, S>(op: &O, x: &Point, streams: &mut [S], tau: usize) -> Result<Point>
where
    O: StochasticOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
{
    let mut out = Point::zeros(op.dim());
    let mut scratch = Point::zeros(op.dim());
    batch_operator_into(op, x, streams, tau, &mut out, &mut scratch)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasProbe {
    pub tau: usize,
    pub bias: Point,
    pub norm: f64,
    /// `norm / ‖x − x*‖`, or `norm` when `x = x*`.
    pub relative: f64,
}

/// Monte-Carlo estimate of `F(x) − E[F̃(x, ξ_τ) | start]`.
///
/// `make_stream(trial)` must return a fresh chain in the conditioning state;
/// for each τ the sample emitted after τ further transitions is used, so τ = 0
/// is the first emitted sample.
pub fn probe_bias_decay<O, E, S, F>(
    mut make_stream: F,
    op: &O,
    exact: &E,
    x: &Point,
    x_star: &Point,
    taus: &[usize],
    trials: usize,
) -> Result<Vec<BiasProbe>>
where
    O: StochasticOperator + ?Sized,
    E: ExactOperator + ?Sized,
    S: SampleStream<Sample = O::Sample>,
    F: FnMut(u64) -> S,
{
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    check_dims(op.dim(), x.len())?;
    check_dims(x.len(), x_star.len())?;
    let fx = exact.apply(x);
    let dist = (x - x_star).norm();
    let mut g = Point::zeros(op.dim());
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut acc = Point::zeros(op.dim());
        for trial in 0..trials {
            let mut stream = make_stream(trial as u64);
            let sample = skip_collect(&mut stream, tau + 1);
            op.eval_into(x, &sample, &mut g);
            acc += &g;
        }
        acc /= trials as f64;
        let bias = &fx - acc;
        let norm = bias.norm();
        let relative = if dist > 0.0 { norm / dist } else { norm };
        out.push(BiasProbe {
            tau,
            bias,
            norm,
            relative,
        });
    }
    Ok(out)
}

/// Least-squares fit of `value ≈ c ρ^τ` on log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub c: f64,
    pub rho: f64,
    pub slope: f64,
}

/// Fit `log value = log c + τ log ρ`; non-positive values are skipped.
/// Returns `None` with fewer than two usable points.
pub fn fit_geometric_decay(points: &[(usize, f64)]) -> Option<GeometricFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|&(t, v)| (t as f64, libm::log(v)))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mt = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    Some(GeometricFit {
        c: libm::exp(intercept),
        rho: libm::exp(slope),
        slope,
    })
}

impl GeometricFit {
    /// Conservative mixing constants: ρ from the slope, C raised until it
    /// dominates every relative bias point.
    pub fn to_mixing(&self, relative_points: &[(usize, f64)]) -> Result<MixingParams> {
        let rho = self.rho.min(1.0 - 1e-12);
        let c = relative_points
            .iter()
            .map(|&(t, v)| v / libm::pow(rho, t as f64))
            .fold(f64::MIN_POSITIVE, f64::max);
        MixingParams::new(c, rho)
    }
}
