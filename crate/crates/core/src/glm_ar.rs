//! Signal estimation with a GLM whose regressors follow a stable AR(1) chain.
//!
//! `η_{t+1} = Bη_t + ε_t`, `E[y_t | η_t] = f(η_tᵀx*)` and
//! `F̃(x, (η, y)) = η f(ηᵀx) − η y`. For the identity link the exact operator
//! is `F(x) = X(x − x*)` with `X = BXBᵀ + Q`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::markov::{stream_rng, SampleStream};
use crate::vi_core::{check_dims, AffineOperator, FeasibleRegion, Point, ProblemParams, StochasticOperator};

/// Truncation radius of all Gaussian draws, in standard deviations.
pub const TRUNCATION: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    /// `f(s) = max{s, 0}`.
    Ramp,
}

impl Link {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Identity => s,
            Self::Ramp => s.max(0.0),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// One observation `(η_t, y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmSample {
    pub eta: Point,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct ArGlmProblem {
    pub b_mat: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub x_star: Point,
    pub link: Link,
    pub label_noise_sd: f64,
    noise_factor: DMatrix<f64>,
    spectral_radius: f64,
}

/// Standard normal draw truncated to `[−TRUNCATION, TRUNCATION]`.
fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= TRUNCATION {
            return z;
        }
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| libm::hypot(z.re, z.im)).fold(0.0, f64::max)
}

/// Solve `X = BXBᵀ + Q` by squaring: `X = Σ_k B^k Q (B^k)ᵀ`.
pub fn solve_lyapunov(b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(b.nrows(), b.ncols())?;
    check_dims(b.nrows(), q.nrows())?;
    check_dims(q.nrows(), q.ncols())?;
    if spectral_radius(b) >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "b_mat",
            reason: "Lyapunov series diverges for an unstable matrix".into(),
        });
    }
    let mut x = q.clone();
    let mut a = b.clone();
    for _ in 0..64 {
        let inc = &a * &x * a.transpose();
        x += &inc;
        a = &a * &a;
        if inc.amax() <= 1e-16 * x.amax() {
            return Ok((&x + x.transpose()) * 0.5);
        }
    }
    Err(Error::Setup("Lyapunov doubling did not converge".into()))
}

impl ArGlmProblem {
    pub fn new(
        b_mat: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        x_star: Point,
        link: Link,
        label_noise_sd: f64,
    ) -> Result<Self> {
        let n = x_star.len();
        check_dims(n, b_mat.nrows())?;
        check_dims(n, b_mat.ncols())?;
        check_dims(n, noise_cov.nrows())?;
        check_dims(n, noise_cov.ncols())?;
        if b_mat.iter().chain(noise_cov.iter()).chain(x_star.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GLM instance"));
        }
        if !(label_noise_sd >= 0.0 && label_noise_sd.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "label_noise_sd",
                reason: format!("must be finite and >= 0, got {label_noise_sd}"),
            });
        }
        let spectral_radius = spectral_radius(&b_mat);
        if !(spectral_radius < 1.0) {
            return Err(Error::InvalidParameter {
                name: "b_mat",
                reason: format!("spectral radius {spectral_radius} is not below 1"),
            });
        }
        if (&noise_cov - noise_cov.transpose()).amax() > 1e-12 * noise_cov.amax().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "noise_cov",
                reason: "must be symmetric".into(),
            });
        }
        let chol: Cholesky<f64, Dyn> = noise_cov.clone().cholesky().ok_or_else(|| Error::InvalidParameter {
            name: "noise_cov",
            reason: "must be positive definite".into(),
        })?;
        Ok(Self {
            noise_factor: chol.l(),
            b_mat,
            noise_cov,
            x_star,
            link,
            label_noise_sd,
            spectral_radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Stationary covariance `X`.
    pub fn stationary_cov(&self) -> Result<DMatrix<f64>> {
        solve_lyapunov(&self.b_mat, &self.noise_cov)
    }

    /// Emit `(η, y)` at `state` and advance to `Bη + ε`.
    pub fn ar_step<R: Rng + ?Sized>(&self, state: &Point, rng: &mut R) -> (Point, GlmSample) {
        let n = self.dim();
        let z = Point::from_fn(n, |_, _| truncated_normal(rng));
        let mut next = &self.b_mat * state;
        next.gemv(1.0, &self.noise_factor, &z, 1.0);
        let noise = if self.label_noise_sd > 0.0 {
            self.label_noise_sd * truncated_normal(rng)
        } else {
            0.0
        };
        let y = self.link.eval(state.dot(&self.x_star)) + noise;
        (next, GlmSample { eta: state.clone(), y })
    }

    /// Chain started at `η₁ = 0`.
    pub fn stream(&self, seed: u64, index: u64) -> ArStream<'_> {
        ArStream {
            problem: self,
            state: Point::zeros(self.dim()),
            rng: stream_rng(seed, index),
        }
    }

    /// Chain advanced `burn_in` steps past `η₁ = 0` before its first emission.
    pub fn warm_stream(&self, seed: u64, index: u64, burn_in: usize) -> ArStream<'_> {
        let mut s = self.stream(seed, index);
        for _ in 0..burn_in {
            s.next_sample();
        }
        s
    }

    /// `F(x) = X(x − x*)`; only available for the identity link.
    pub fn exact_operator(&self) -> Result<AffineOperator> {
        if self.link != Link::Identity {
            return Err(Error::Config("exact operator is only available for the identity link".into()));
        }
        AffineOperator::centered(self.stationary_cov()?, &self.x_star)
    }

    /// Constants of the identity-link instance under Gaussian moments:
    /// `μ = λ_min(X)`, `L = λ_max(X)`, `σ² = s²·tr X`, `ς² = λ_max² + tr(X)·λ_max`.
    pub fn identity_params(&self, c_mix: f64, rho_mix: f64) -> Result<ProblemParams> {
        let x = self.stationary_cov()?;
        let eig = x.clone().symmetric_eigenvalues();
        let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let lmax = eig.iter().copied().fold(0.0, f64::max);
        let tr = x.trace();
        let mut p = ProblemParams::deterministic(lmin, lmax);
        p.lip_bar = lmax.max(tr);
        p.sigma = self.label_noise_sd * libm::sqrt(tr);
        p.varsigma = libm::sqrt(lmax * lmax + tr * lmax);
        p.c_mix = c_mix;
        p.rho_mix = rho_mix;
        Ok(p)
    }

    /// Check strong monotonicity of the sample-average ramp operator on `region`
    /// and return the smallest observed modulus.
    pub fn verify_monotone_region(
        &self,
        region: &FeasibleRegion,
        n_samples: usize,
        n_pairs: usize,
        seed: u64,
    ) -> Result<f64> {
        let (center, radius) = match region {
            FeasibleRegion::Ball { center, radius } => (center, *radius),
            FeasibleRegion::WholeSpace => {
                return Err(Error::Setup("monotonicity check needs a bounded ball".into()))
            }
        };
        check_dims(self.dim(), center.len())?;
        let samples: Vec<GlmSample> = {
            let mut s = self.warm_stream(seed, 0, 200);
            (0..n_samples).map(|_| s.next_sample()).collect()
        };
        let mut rng: ChaCha8Rng = stream_rng(seed, 1);
        let draw = |rng: &mut ChaCha8Rng| {
            let dir = Point::from_fn(self.dim(), |_, _| StandardNormal.sample(&mut *rng));
            let scale = radius * libm::pow(rng.gen::<f64>(), 1.0 / self.dim() as f64) / dir.norm();
            center + dir * scale
        };
        let mut worst = f64::INFINITY;
        for _ in 0..n_pairs {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let d = &a - &b;
            let mut inner = 0.0;
            for s in &samples {
                let fa = self.link.eval(s.eta.dot(&a));
                let fb = self.link.eval(s.eta.dot(&b));
                inner += (fa - fb) * s.eta.dot(&d);
            }
            worst = worst.min(inner / n_samples as f64 / d.norm_squared());
        }
        if worst > 1e-10 {
            Ok(worst)
        } else {
            Err(Error::Setup(format!(
                "ramp operator is not strongly monotone on the ball (modulus estimate {worst:e})"
            )))
        }
    }
}

impl StochasticOperator for ArGlmProblem {
    type Sample = GlmSample;
    fn dim(&self) -> usize {
        self.x_star.len()
    }
    fn eval_into(&self, x: &Point, s: &GlmSample, out: &mut Point) {
        let w = self.link.eval(s.eta.dot(x)) - s.y;
        out.copy_from(&s.eta);
        *out *= w;
    }
}

/// `F̃(x, (η, y)) = η f(ηᵀx) − η y`.
pub fn glm_operator(problem: &ArGlmProblem, x: &Point, sample: &GlmSample) -> Result<Point> {
    check_dims(problem.dim(), x.len())?;
    check_dims(problem.dim(), sample.eta.len())?;
    Ok(problem.eval(x, sample))
}

#[derive(Debug, Clone)]
pub struct ArStream<'a> {
    problem: &'a ArGlmProblem,
    state: Point,
    rng: ChaCha8Rng,
}

impl ArStream<'_> {
    pub fn state(&self) -> &Point {
        &self.state
    }
}

impl SampleStream for ArStream<'_> {
    type Sample = GlmSample;
    fn next_sample(&mut self) -> GlmSample {
        let (next, sample) = self.problem.ar_step(&self.state, &mut self.rng);
        self.state = next;
        sample
    }
}
