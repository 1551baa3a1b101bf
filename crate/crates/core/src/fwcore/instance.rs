//! Problem instances: quadratics over a ball or an ellipsoid.

use log::warn;

use super::linalg::{dot, jacobi_eigen, norm, scale, sub, SymMatrix};
use super::PolarState;
use crate::error::{Error, Result};
use crate::numeric::{Scalar, ScalarContext};

/// `min (mu/2) |x - R p|^2` over the ball of radius `R`.
///
/// The model problem has `|p| = 1`, `R = 1`, `mu = 2`, i.e. `f(x) = |x - p|^2`.
/// Targets off the sphere are allowed so the interior and exterior regimes
/// can share this type; polar coordinates are always taken in the scaled
/// frame `x / R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallInstance<S> {
    pub target: Vec<S>,
    pub radius: S,
    pub mu: S,
}

impl<S: Scalar> BallInstance<S> {
    /// Default instance: unit target, `R = 1`, `mu = 2`.
    pub fn model<C: ScalarContext<Scalar = S>>(ctx: &C, target: Vec<S>) -> Result<Self> {
        let inst = Self::new(ctx, target, ctx.one(), ctx.from_i64(2))?;
        if !inst.boundary_target(ctx) {
            return Err(Error::Instance("model target must be a unit vector".into()));
        }
        Ok(inst)
    }

    pub fn new<C: ScalarContext<Scalar = S>>(ctx: &C, target: Vec<S>, radius: S, mu: S) -> Result<Self> {
        if target.len() < 2 {
            return Err(Error::Instance(format!("dimension {} < 2", target.len())));
        }
        if radius <= ctx.zero() || mu <= ctx.zero() {
            return Err(Error::Instance("radius and mu must be positive".into()));
        }
        Ok(Self { target, radius, mu })
    }

    pub fn dimension(&self) -> usize {
        self.target.len()
    }

    /// `|p| = 1` within the context slack.
    pub fn boundary_target<C: ScalarContext<Scalar = S>>(&self, ctx: &C) -> bool {
        (norm(ctx, &self.target) - ctx.one()).abs() <= ctx.slack()
    }

    /// Unconstrained minimiser `R p`.
    pub fn center(&self) -> Vec<S> {
        scale(&self.radius, &self.target)
    }

    pub fn objective<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        let d = sub(x, &self.center());
        self.mu.clone() / ctx.from_i64(2) * dot(ctx, &d, &d)
    }

    pub fn gradient<C: ScalarContext<Scalar = S>>(&self, _ctx: &C, x: &[S]) -> Vec<S> {
        scale(&self.mu, &sub(x, &self.center()))
    }

    pub fn lmo<C: ScalarContext<Scalar = S>>(&self, ctx: &C, g: &[S]) -> Result<Vec<S>> {
        let n = norm(ctx, g);
        if n <= ctx.termination_threshold() {
            return Err(Error::Termination);
        }
        let k = -(self.radius.clone() / n);
        Ok(scale(&k, g))
    }

    pub fn minimizer<C: ScalarContext<Scalar = S>>(&self, ctx: &C) -> Vec<S> {
        let n = norm(ctx, &self.target);
        if n <= ctx.one() {
            self.center()
        } else {
            scale(&(self.radius.clone() / n), &self.target)
        }
    }

    /// `f(x) - f(x*)`. Equals `(mu R^2 / 2) r^2` whenever `|p| <= 1`.
    pub fn gap<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        let n = norm(ctx, &self.target);
        let half_mu = self.mu.clone() / ctx.from_i64(2);
        let d = sub(x, &self.center());
        let here = dot(ctx, &d, &d);
        if n <= ctx.one() {
            half_mu * here
        } else {
            let far = (self.radius.clone() * (n - ctx.one())).square();
            half_mu * (here - far)
        }
    }

    /// `|x|^2 / R^2`; feasible iff at most 1.
    pub fn constraint<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        dot(ctx, x, x) / self.radius.square()
    }

    pub fn lipschitz(&self) -> S {
        self.mu.clone()
    }

    /// Second derivative of `f` along `d`.
    pub fn curvature<C: ScalarContext<Scalar = S>>(&self, ctx: &C, d: &[S]) -> S {
        self.mu.clone() * dot(ctx, d, d)
    }

    /// Polar state of `x / R` relative to the target (`theta` uses the target's direction).
    pub fn polar<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> Result<PolarState<S>> {
        let u = scale(&(ctx.one() / &self.radius), x);
        let d = sub(&u, &self.target);
        let r = norm(ctx, &d);
        if r <= ctx.termination_threshold() {
            return Err(Error::Termination);
        }
        let pn = norm(ctx, &self.target);
        let theta = if pn.is_zero() {
            -ctx.one()
        } else {
            (dot(ctx, &d, &self.target) / (r.clone() * pn))
                .max_of(-ctx.one())
                .min_of(ctx.one())
        };
        Ok(PolarState { r, theta })
    }
}

/// `min (alpha/2) x^T A x + c^T x` over `{x : x^T A x <= 1}`.
///
/// Spectral data of `A` is computed once at construction.
#[derive(Debug, Clone)]
pub struct EllipsoidInstance<S> {
    shape: SymMatrix<S>,
    alpha: S,
    linear: Vec<S>,
    sqrt: SymMatrix<S>,
    inv_sqrt: SymMatrix<S>,
    inv: SymMatrix<S>,
    lambda_max: S,
}

/// Smallest admissible `lambda_min / lambda_max`.
const SPD_RATIO: f64 = 1e-12;

impl<S: Scalar> EllipsoidInstance<S> {
    pub fn new<C: ScalarContext<Scalar = S>>(ctx: &C, shape: SymMatrix<S>, alpha: S, linear: Vec<S>) -> Result<Self> {
        let d = shape.dim();
        if d < 2 {
            return Err(Error::Instance(format!("dimension {d} < 2")));
        }
        if linear.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: linear.len(),
            });
        }
        if alpha <= ctx.zero() {
            return Err(Error::Instance("alpha must be positive".into()));
        }
        let eig = jacobi_eigen(ctx, &shape);
        let lambda_max = eig.max_value().clone();
        if lambda_max <= ctx.zero() || eig.min_value().clone() <= ctx.from_f64(SPD_RATIO) * &lambda_max {
            return Err(Error::NotSpd);
        }
        let sqrt = eig.map_spectrum(ctx, |l| l.sqrt());
        let inv_sqrt = eig.map_spectrum(ctx, |l| ctx.one() / l.sqrt());
        let inv = eig.map_spectrum(ctx, |l| ctx.one() / l);
        Ok(Self {
            shape,
            alpha,
            linear,
            sqrt,
            inv_sqrt,
            inv,
            lambda_max,
        })
    }

    pub fn dimension(&self) -> usize {
        self.shape.dim()
    }

    pub fn shape(&self) -> &SymMatrix<S> {
        &self.shape
    }

    pub fn alpha(&self) -> &S {
        &self.alpha
    }

    pub fn linear(&self) -> &[S] {
        &self.linear
    }

    /// `A^{1/2}`
    pub fn sqrt_shape(&self) -> &SymMatrix<S> {
        &self.sqrt
    }

    /// `A^{-1/2}`
    pub fn inv_sqrt_shape(&self) -> &SymMatrix<S> {
        &self.inv_sqrt
    }

    pub fn objective<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        self.alpha.clone() / ctx.from_i64(2) * self.shape.quad_form(ctx, x) + dot(ctx, &self.linear, x)
    }

    pub fn gradient<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> Vec<S> {
        let ax = self.shape.mul_vec(ctx, x);
        ax.into_iter()
            .zip(&self.linear)
            .map(|(a, c)| self.alpha.clone() * a + c)
            .collect()
    }

    /// `-A^{-1} g / sqrt(g^T A^{-1} g)`
    pub fn lmo<C: ScalarContext<Scalar = S>>(&self, ctx: &C, g: &[S]) -> Result<Vec<S>> {
        let w = self.inv.mul_vec(ctx, g);
        let q = dot(ctx, g, &w);
        if q <= ctx.termination_threshold().square() {
            return Err(Error::Termination);
        }
        let k = -(ctx.one() / q.sqrt());
        Ok(scale(&k, &w))
    }

    /// `x^T A x`; feasible iff at most 1.
    pub fn constraint<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        self.shape.quad_form(ctx, x)
    }

    pub fn lipschitz(&self) -> S {
        self.alpha.clone() * &self.lambda_max
    }

    pub fn curvature<C: ScalarContext<Scalar = S>>(&self, ctx: &C, d: &[S]) -> S {
        self.alpha.clone() * self.shape.quad_form(ctx, d)
    }

    /// `-(1/alpha) A^{-1/2} c`
    pub fn mapped_target<C: ScalarContext<Scalar = S>>(&self, ctx: &C) -> Vec<S> {
        let k = -(ctx.one() / &self.alpha);
        scale(&k, &self.inv_sqrt.mul_vec(ctx, &self.linear))
    }

    pub fn minimizer<C: ScalarContext<Scalar = S>>(&self, ctx: &C) -> Vec<S> {
        let p = self.mapped_target(ctx);
        let n = norm(ctx, &p);
        let u = if n <= ctx.one() { p } else { scale(&(ctx.one() / n), &p) };
        self.inv_sqrt.mul_vec(ctx, &u)
    }

    /// `f(x) - f(x*)`, evaluated in the original coordinates.
    pub fn gap<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        let xs = self.minimizer(ctx);
        self.objective(ctx, x) - self.objective(ctx, &xs)
    }
}

/// `u = Phi x` with `Phi = A^{1/2}`.
#[derive(Debug, Clone)]
pub struct LinearMap<S> {
    pub forward: SymMatrix<S>,
    pub inverse: SymMatrix<S>,
}

impl<S: Scalar> LinearMap<S> {
    pub fn apply<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> Vec<S> {
        self.forward.mul_vec(ctx, x)
    }

    pub fn apply_inverse<C: ScalarContext<Scalar = S>>(&self, ctx: &C, u: &[S]) -> Vec<S> {
        self.inverse.mul_vec(ctx, u)
    }
}

/// Unit-ball instance equivalent to `inst` under `u = A^{1/2} x`.
#[allow(clippy::type_complexity)]
pub fn map_to_ball<C: ScalarContext>(
    ctx: &C,
    inst: &EllipsoidInstance<C::Scalar>,
) -> Result<(BallInstance<C::Scalar>, LinearMap<C::Scalar>)> {
    let target = inst.mapped_target(ctx);
    let ball = BallInstance::new(ctx, target, ctx.one(), inst.alpha.clone())?;
    if !ball.boundary_target(ctx) {
        warn!(
            "mapped target has norm {:.6}, not on the unit sphere",
            norm(ctx, &ball.target).to_f64_lossy()
        );
    }
    let map = LinearMap {
        forward: inst.sqrt.clone(),
        inverse: inst.inv_sqrt.clone(),
    };
    Ok((ball, map))
}

/// Either instance family, with the operations the solver needs.
#[derive(Debug, Clone)]
pub enum Instance<S> {
    Ball(BallInstance<S>),
    Ellipsoid(EllipsoidInstance<S>),
}

impl<S: Scalar> Instance<S> {
    pub fn dimension(&self) -> usize {
        match self {
            Instance::Ball(b) => b.dimension(),
            Instance::Ellipsoid(e) => e.dimension(),
        }
    }

    pub fn gradient<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> Vec<S> {
        match self {
            Instance::Ball(b) => b.gradient(ctx, x),
            Instance::Ellipsoid(e) => e.gradient(ctx, x),
        }
    }

    pub fn lmo<C: ScalarContext<Scalar = S>>(&self, ctx: &C, g: &[S]) -> Result<Vec<S>> {
        match self {
            Instance::Ball(b) => b.lmo(ctx, g),
            Instance::Ellipsoid(e) => e.lmo(ctx, g),
        }
    }

    pub fn gap<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        match self {
            Instance::Ball(b) => b.gap(ctx, x),
            Instance::Ellipsoid(e) => e.gap(ctx, x),
        }
    }

    pub fn constraint<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> S {
        match self {
            Instance::Ball(b) => b.constraint(ctx, x),
            Instance::Ellipsoid(e) => e.constraint(ctx, x),
        }
    }

    pub fn lipschitz(&self) -> S {
        match self {
            Instance::Ball(b) => b.lipschitz(),
            Instance::Ellipsoid(e) => e.lipschitz(),
        }
    }

    pub fn curvature<C: ScalarContext<Scalar = S>>(&self, ctx: &C, d: &[S]) -> S {
        match self {
            Instance::Ball(b) => b.curvature(ctx, d),
            Instance::Ellipsoid(e) => e.curvature(ctx, d),
        }
    }
}
