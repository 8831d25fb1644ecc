//! Euclidean geometry for variational inequalities: feasible regions, the prox
//! step, the Bregman distance, the natural residual and operator interfaces.

use alloc::format;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

/// Relative slack used when deciding whether a point sits on a ball boundary.
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleRegion {
    WholeSpace,
    Ball { center: Point, radius: f64 },
}

impl FeasibleRegion {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be finite and > 0, got {radius}"),
            });
        }
        check_finite(&center, "ball center")?;
        Ok(Self::Ball { center, radius })
    }

    pub fn origin_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(Point::zeros(dim), radius)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::WholeSpace => None,
            Self::Ball { center, .. } => Some(center.len()),
        }
    }

    /// Diameter of the region, `None` when unbounded.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            Self::WholeSpace => None,
            Self::Ball { radius, .. } => Some(2.0 * radius),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Self::WholeSpace => true,
            Self::Ball { center, radius } => {
                (x - center).norm() <= radius * (1.0 + BOUNDARY_TOL) + 1e-12
            }
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != n => Err(Error::DimensionMismatch {
                expected: d,
                got: n,
            }),
            _ => Ok(()),
        }
    }

    /// Euclidean projection, in place.
    pub fn project_in_place(&self, x: &mut Point) {
        if let Self::Ball { center, radius } = self {
            let dist = libm::sqrt(sq_dist(x.as_slice(), center.as_slice()));
            if dist > *radius {
                let scale = radius / dist;
                for (xi, ci) in x.iter_mut().zip(center.iter()) {
                    *xi = ci + (*xi - ci) * scale;
                }
            }
        }
    }
}

/// `‖a − b‖²` with independent partial sums so the loop vectorizes.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `‖a‖²`, vectorized as [`sq_dist`].
pub(crate) fn sq_norm(a: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let ra = ca.remainder();
    for x in ca {
        for k in 0..4 {
            acc[k] += x[k] * x[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + ra.iter().map(|v| v * v).sum::<f64>()
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        })
    }
}

pub(crate) fn check_finite(x: &Point, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `argmin_z γ⟨g, z⟩ + ½‖z − x‖²` over the region, i.e. the projection of `x − γg`.
pub fn prox_step(x: &Point, g: &Point, gamma: f64, region: &FeasibleRegion) -> Result<Point> {
    let mut out = Point::zeros(x.len());
    prox_step_into(x, g, gamma, region, &mut out)?;
    Ok(out)
}

/// Allocation-free variant of [`prox_step`] writing into `out`.
pub fn prox_step_into(
    x: &Point,
    g: &Point,
    gamma: f64,
    region: &FeasibleRegion,
    out: &mut Point,
) -> Result<()> {
    check_dims(x.len(), g.len())?;
    check_dims(x.len(), out.len())?;
    region.check_dim(x.len())?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be finite and >= 0, got {gamma}"),
        });
    }
    check_finite(x, "prox_step point")?;
    check_finite(g, "prox_step direction")?;
    prox_step_raw(x, g, gamma, region, out);
    Ok(())
}

/// [`prox_step_into`] without validation, for hot loops that check the result.
pub(crate) fn prox_step_raw(x: &Point, g: &Point, gamma: f64, region: &FeasibleRegion, out: &mut Point) {
    let (xs, gs) = (x.as_slice(), g.as_slice());
    for ((o, xi), gi) in out.as_mut_slice().iter_mut().zip(xs).zip(gs) {
        *o = xi - gamma * gi;
    }
    region.project_in_place(out);
}

/// `V(x, y) = ½‖x − y‖²`.
pub fn bregman(x: &Point, y: &Point) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    Ok(0.5 * (x - y).norm_squared())
}

/// Distance from `fx` to the negated normal cone of the region at `x`.
pub fn residual(x: &Point, fx: &Point, region: &FeasibleRegion) -> Result<f64> {
    check_dims(x.len(), fx.len())?;
    region.check_dim(x.len())?;
    match region {
        FeasibleRegion::WholeSpace => Ok(fx.norm()),
        FeasibleRegion::Ball { center, radius } => {
            let d = x - center;
            let r = d.norm();
            if r > radius * (1.0 + BOUNDARY_TOL) + 1e-12 {
                return Err(Error::OutsideRegion { excess: r - radius });
            }
            if r < radius * (1.0 - BOUNDARY_TOL) {
                return Ok(fx.norm());
            }
            // The normal cone is the outward ray; fx may be absorbed along -d.
            let alpha = (-fx.dot(&d) / (r * r)).max(0.0);
            Ok((fx + d * alpha).norm())
        }
    }
}

/// A deterministic operator `F`.
pub trait ExactOperator {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &Point, out: &mut Point);

    fn apply(&self, x: &Point) -> Point {
        let mut out = Point::zeros(self.dim());
        self.apply_into(x, &mut out);
        out
    }
}

/// A stochastic operator `F̃(x, ξ)` over an opaque sample type.
pub trait StochasticOperator {
    type Sample;
    fn dim(&self) -> usize;
    fn eval_into(&self, x: &Point, sample: &Self::Sample, out: &mut Point);

    fn eval(&self, x: &Point, sample: &Self::Sample) -> Point {
        let mut out = Point::zeros(self.dim());
        self.eval_into(x, sample, &mut out);
        out
    }
}

impl<T: ExactOperator + ?Sized> ExactOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &Point, out: &mut Point) {
        (**self).apply_into(x, out)
    }
}

impl<T: StochasticOperator + ?Sized> StochasticOperator for &T {
    type Sample = T::Sample;
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &Point, sample: &Self::Sample, out: &mut Point) {
        (**self).eval_into(x, sample, out)
    }
}

/// Affine operator `F(x) = A x − b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator {
    pub a: DMatrix<f64>,
    pub b: Point,
}

impl AffineOperator {
    pub fn new(a: DMatrix<f64>, b: Point) -> Result<Self> {
        check_dims(a.nrows(), a.ncols())?;
        check_dims(a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    /// `F(x) = A (x − x*)`.
    pub fn centered(a: DMatrix<f64>, x_star: &Point) -> Result<Self> {
        check_dims(a.ncols(), x_star.len())?;
        let b = &a * x_star;
        Self::new(a, b)
    }
}

impl ExactOperator for AffineOperator {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn apply_into(&self, x: &Point, out: &mut Point) {
        out.gemv(1.0, &self.a, x, 0.0);
        *out -= &self.b;
    }
}

/// Wraps an exact operator as a noise-free stochastic operator with unit samples.
#[derive(Debug, Clone)]
pub struct Noiseless<T>(pub T);

impl<T: ExactOperator> StochasticOperator for Noiseless<T> {
    type Sample = ();
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval_into(&self, x: &Point, _sample: &(), out: &mut Point) {
        self.0.apply_into(x, out)
    }
}

/// Problem constants consumed by the stepsize formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    /// Generalized monotonicity modulus μ.
    pub mu: f64,
    /// Lipschitz constant L of the exact operator.
    pub lip: f64,
    /// L̄ = max{L, L̃} with L̃ the pointwise constant of the stochastic operator.
    pub lip_bar: f64,
    pub sigma: f64,
    pub varsigma: f64,
    pub c_mix: f64,
    pub rho_mix: f64,
    pub diam: Option<f64>,
    pub ball_g: Option<f64>,
    pub f_star_norm: f64,
}

impl ProblemParams {
    /// Noise-free, fast-mixing defaults around the given μ and L.
    pub fn deterministic(mu: f64, lip: f64) -> Self {
        Self {
            mu,
            lip,
            lip_bar: lip,
            sigma: 0.0,
            varsigma: 0.0,
            c_mix: 1.0,
            rho_mix: 0.5,
            diam: None,
            ball_g: None,
            f_star_norm: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: &str, v: f64) -> Error {
            Error::InvalidParameter {
                name,
                reason: format!("{reason}, got {v}"),
            }
        }
        let nonneg = [
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("varsigma", self.varsigma),
            ("f_star_norm", self.f_star_norm),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(name, "must be finite and >= 0", v));
            }
        }
        for (name, v) in [("lip", self.lip), ("lip_bar", self.lip_bar), ("c_mix", self.c_mix)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(name, "must be finite and > 0", v));
            }
        }
        if !(self.rho_mix > 0.0 && self.rho_mix < 1.0) {
            return Err(bad("rho_mix", "must lie in (0, 1)", self.rho_mix));
        }
        if self.mu > self.lip {
            return Err(bad("mu", "must not exceed lip", self.mu));
        }
        for (name, v) in [("diam", self.diam), ("ball_g", self.ball_g)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad(name, "must be finite and > 0", v));
                }
            }
        }
        Ok(())
    }

    /// Replace L (and L̄, which the TD schedules read) by a tuned value.
    pub fn with_lip_override(mut self, lip: f64) -> Self {
        self.lip = lip;
        self.lip_bar = lip;
        self
    }
}
