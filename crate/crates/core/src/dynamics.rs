//! Scalar dynamics of line-search Frank-Wolfe on the ball model problem.
//!
//! Two coordinate systems are used. Polar `(r, theta)` describes one iterate;
//! `(r, s)` pairs a residual with its next contraction factor `s = r'/r`.
//! The forward map `F` advances `(r, s)` on the domain `M`, the backward map
//! `G` inverts it on the smaller domain `M~ = {0 < r <= 1/3, 0 <= s <= 1/(1+r)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fwcore::PolarState;
use crate::numeric::{Scalar, ScalarContext};

/// Which domain membership has been verified for an [`RSState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    M,
    MTilde,
    Unchecked,
}

/// Residual `r` and contraction `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RSState<S> {
    pub r: S,
    pub s: S,
    pub domain: Domain,
}

impl<S: Scalar> RSState<S> {
    pub fn new(r: S, s: S) -> Self {
        Self {
            r,
            s,
            domain: Domain::Unchecked,
        }
    }

    pub fn in_m<C: ScalarContext<Scalar = S>>(ctx: &C, r: S, s: S) -> Result<Self> {
        if !in_m(ctx, &r, &s) {
            return Err(violation(ctx, "M", &r, &s));
        }
        Ok(Self {
            r,
            s,
            domain: Domain::M,
        })
    }

    pub fn in_mtilde<C: ScalarContext<Scalar = S>>(ctx: &C, r: S, s: S) -> Result<Self> {
        if !in_mtilde(ctx, &r, &s) {
            return Err(violation(ctx, "M~", &r, &s));
        }
        Ok(Self {
            r,
            s,
            domain: Domain::MTilde,
        })
    }
}

fn violation<C: ScalarContext>(ctx: &C, domain: &'static str, r: &C::Scalar, s: &C::Scalar) -> Error {
    Error::DomainViolation {
        domain,
        r: ctx.to_decimal(r),
        s: ctx.to_decimal(s),
    }
}

/// Values in `[-slack, 0)` become 0; anything more negative is an error.
fn clamp_radicand<C: ScalarContext>(ctx: &C, v: C::Scalar) -> Result<C::Scalar> {
    if v >= ctx.zero() {
        Ok(v)
    } else if v >= -ctx.slack() {
        Ok(ctx.zero())
    } else {
        Err(Error::NegativeRadicand(ctx.to_decimal(&v)))
    }
}

/// Upper edge of `M`: `1/(1+r)` for `r <= 1`, `sqrt((2-r)/4)` for `1 < r <= 2`.
pub fn sbar<C: ScalarContext>(ctx: &C, r: &C::Scalar) -> Result<C::Scalar> {
    let two = ctx.from_i64(2);
    if *r <= ctx.zero() || *r > two {
        return Err(Error::OutOfRange {
            what: "r",
            value: ctx.to_decimal(r),
        });
    }
    Ok(sbar_unchecked(ctx, r))
}

fn sbar_unchecked<C: ScalarContext>(ctx: &C, r: &C::Scalar) -> C::Scalar {
    if *r <= ctx.one() {
        ctx.one() / (ctx.one() + r)
    } else {
        ((ctx.from_i64(2) - r).max_of(ctx.zero()) / ctx.from_i64(4)).sqrt()
    }
}

/// Membership in `M` with the context slack at the boundary.
pub fn in_m<C: ScalarContext>(ctx: &C, r: &C::Scalar, s: &C::Scalar) -> bool {
    let slack = ctx.slack();
    *r > ctx.zero()
        && *r <= ctx.from_i64(2) + &slack
        && *s >= -slack.clone()
        && *s <= sbar_unchecked(ctx, &r.clone().min_of(ctx.from_i64(2))) + &slack
}

/// Membership in `M~` with the context slack at the boundary.
pub fn in_mtilde<C: ScalarContext>(ctx: &C, r: &C::Scalar, s: &C::Scalar) -> bool {
    let slack = ctx.slack();
    *r > ctx.zero()
        && *r <= ctx.ratio(1, 3) + &slack
        && *s >= -slack.clone()
        && *s <= ctx.one() / (ctx.one() + r) + &slack
}

/// Forward map `F(r, s) = (r s, sqrt((1 - (1+r)^2 s^2) / (2 - 2s - (2+r) r s^2)))`.
pub fn forward<C: ScalarContext>(ctx: &C, st: &RSState<C::Scalar>) -> Result<RSState<C::Scalar>> {
    let (r, s) = (&st.r, &st.s);
    if !in_m(ctx, r, s) {
        return Err(violation(ctx, "M", r, s));
    }
    let one = ctx.one();
    let two = ctx.from_i64(2);
    let s2 = s.square();
    let num = one_minus_scaled_sq(ctx, r, s);
    let den = two.clone() * (one.clone() - s) - (two + r) * r * &s2;
    if den <= ctx.zero() {
        return Err(violation(ctx, "M", r, s));
    }
    let num = clamp_radicand(ctx, num)?;
    let s_next = (num / den).sqrt();
    let r_next = r.clone() * s;
    let domain = if in_m(ctx, &r_next, &s_next) {
        Domain::M
    } else {
        Domain::Unchecked
    };
    Ok(RSState {
        r: r_next,
        s: s_next,
        domain,
    })
}

/// `1 - ((1+r) s)^2` as `(1 - s - rs)(1 + s + rs)`; `1 - s` is exact for `s >= 1/2`,
/// so this keeps its relative accuracy as `(1+r) s -> 1`.
fn one_minus_scaled_sq<C: ScalarContext>(ctx: &C, r: &C::Scalar, s: &C::Scalar) -> C::Scalar {
    let one = ctx.one();
    let rs = r.clone() * s;
    (one.clone() - s - &rs) * (one + s + rs)
}

/// `X = (1+r) s^2 - r` and `Y = sqrt((1 - s^2)(1 - (1+r)^2 s^2))` on `M~`.
pub fn backward_xy<C: ScalarContext>(ctx: &C, st: &RSState<C::Scalar>) -> Result<(C::Scalar, C::Scalar)> {
    let (r, s) = (&st.r, &st.s);
    if !in_mtilde(ctx, r, s) {
        return Err(violation(ctx, "M~", r, s));
    }
    let one = ctx.one();
    let s2 = s.square();
    let x = (one.clone() + r) * &s2 - r;
    let rad = (one.clone() - s) * (one + s) * one_minus_scaled_sq(ctx, r, s);
    let y = clamp_radicand(ctx, rad)?.sqrt();
    Ok((x, y))
}

/// Root of the backward quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    /// `X + Y`, the inverse of `F`.
    #[default]
    Stable,
    /// `X - Y`; no claims are made about this root.
    Alternate,
}

/// Backward map `G(r, s) = (r/(X+Y), X+Y)`. `X + Y >= 5/12` on `M~`.
pub fn backward<C: ScalarContext>(ctx: &C, st: &RSState<C::Scalar>) -> Result<RSState<C::Scalar>> {
    backward_branch(ctx, st, Branch::Stable)
}

pub fn backward_branch<C: ScalarContext>(
    ctx: &C,
    st: &RSState<C::Scalar>,
    branch: Branch,
) -> Result<RSState<C::Scalar>> {
    let (x, y) = backward_xy(ctx, st)?;
    let s_prev = match branch {
        Branch::Stable => x + y,
        Branch::Alternate => x - y,
    };
    if s_prev <= ctx.zero() {
        return Err(Error::OutOfRange {
            what: "backward contraction",
            value: ctx.to_decimal(&s_prev),
        });
    }
    Ok(RSState {
        r: st.r.clone() / &s_prev,
        s: s_prev,
        domain: Domain::M,
    })
}

/// Angle of the iterate whose line-search step contracts `r` by exactly `s`:
/// `theta = -s^2 (r+1) - sqrt((s^2 - 1)(s^2 (1+r)^2 - 1))`.
pub fn reconstruct_theta<C: ScalarContext>(ctx: &C, st: &RSState<C::Scalar>) -> Result<C::Scalar> {
    let (r, s) = (&st.r, &st.s);
    if !in_m(ctx, r, s) {
        return Err(violation(ctx, "M", r, s));
    }
    let one = ctx.one();
    let s2 = s.square();
    let rp1 = one.clone() + r;
    let rad = (s2.clone() - &one) * (s2.clone() * rp1.square() - &one);
    let root = clamp_radicand(ctx, rad)?.sqrt();
    Ok((-(s2 * rp1) - root).max_of(-one))
}

/// `r_1(s) = -1 + sqrt(1 - (2s^2 - s - 1)/(s^2 (s+1)))`: the residual at which
/// contraction `s` repeats itself. Decreasing on `[0.49, 1]`, zero at `s = 1`.
pub fn monotonicity_radius<C: ScalarContext>(ctx: &C, s: &C::Scalar) -> C::Scalar {
    let one = ctx.one();
    let s2 = s.square();
    let q = (ctx.from_i64(2) * &s2 - s - &one) / (s2 * (s.clone() + &one));
    (one.clone() - q).max_of(ctx.zero()).sqrt() - one
}

/// Lower end of the bisection bracket for [`threshold_g`].
const G_BRACKET_LO: (i64, i64) = (49, 100);

/// Monotonicity threshold `g(r)`: the `s` in `[0.49, 1]` with `r_1(s) = r`,
/// by bisection. Defined for `0 < r <= r_1(0.49) ~ 0.955`.
pub fn threshold_g<C: ScalarContext>(ctx: &C, r: &C::Scalar) -> Result<C::Scalar> {
    let mut lo = ctx.ratio(G_BRACKET_LO.0, G_BRACKET_LO.1);
    let mut hi = ctx.one();
    if *r <= ctx.zero() || *r > monotonicity_radius(ctx, &lo) {
        return Err(Error::OutOfRange {
            what: "r for threshold g",
            value: ctx.to_decimal(r),
        });
    }
    let half = ctx.ratio(1, 2);
    for _ in 0..ctx.mantissa_bits() + 8 {
        let mid = (lo.clone() + &hi) * &half;
        if mid == lo || mid == hi {
            break;
        }
        if monotonicity_radius(ctx, &mid) > *r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * half)
}

/// `(1+s) r (2s + r) >= (1-s)(2s + 1)`: holds iff the backward step does not
/// increase `s`, i.e. the forward contraction is nondecreasing into `(r, s)`.
pub fn monotone_condition<C: ScalarContext>(ctx: &C, st: &RSState<C::Scalar>) -> bool {
    let (r, s) = (&st.r, &st.s);
    let one = ctx.one();
    let two_s = ctx.from_i64(2) * s;
    let lhs = (one.clone() + s) * r * (two_s.clone() + r);
    let rhs = (one.clone() - s) * (two_s + one);
    lhs >= rhs
}

/// A jump `s_next < 1/2` requires `s > 1/(1+r)^2`. Vacuously true otherwise.
pub fn check_jump_precondition<C: ScalarContext>(ctx: &C, r: &C::Scalar, s: &C::Scalar, s_next: &C::Scalar) -> bool {
    *s_next >= ctx.ratio(1, 2) || *s > ctx.one() / (ctx.one() + r).square()
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolarStep<S> {
    Next(PolarState<S>),
    /// New residual at or below the termination threshold.
    Terminated,
}

impl<S> PolarStep<S> {
    pub fn state(self) -> Option<PolarState<S>> {
        match self {
            PolarStep::Next(s) => Some(s),
            PolarStep::Terminated => None,
        }
    }
}

/// One Frank-Wolfe step with stepsize `gamma` in polar coordinates.
pub fn polar_step<C: ScalarContext>(ctx: &C, st: &PolarState<C::Scalar>, gamma: &C::Scalar) -> PolarStep<C::Scalar> {
    let (r, theta) = (&st.r, &st.theta);
    let a = (ctx.one() - gamma) * r - gamma;
    let r2 = a.square() - ctx.from_i64(2) * gamma * &a * theta + gamma.square();
    if r2 <= ctx.termination_threshold().square() {
        return PolarStep::Terminated;
    }
    let r_next = r2.sqrt();
    let theta_next = ((a * theta - gamma) / &r_next).max_of(-ctx.one());
    PolarStep::Next(PolarState {
        r: r_next,
        theta: theta_next,
    })
}

/// Exact line-search step in polar coordinates:
/// `r'^2 = r^2 (1 - theta^2) / ((r+1)^2 + 2 (r+1) theta + 1)`, `theta' = -((r+1)/r) r'`.
pub fn ls_polar_step<C: ScalarContext>(ctx: &C, st: &PolarState<C::Scalar>) -> PolarStep<C::Scalar> {
    let (r, theta) = (&st.r, &st.theta);
    let one = ctx.one();
    let rp1 = one.clone() + r;
    let den = rp1.square() + ctx.from_i64(2) * &rp1 * theta + &one;
    let num = r.square() * (one.clone() - theta.square());
    if den <= ctx.zero() {
        return PolarStep::Terminated;
    }
    let r2 = num / den;
    if r2 <= ctx.termination_threshold().square() {
        return PolarStep::Terminated;
    }
    let r_next = r2.sqrt();
    let theta_next = (-(rp1 / r) * &r_next).max_of(-one);
    PolarStep::Next(PolarState {
        r: r_next,
        theta: theta_next,
    })
}

/// Named curves of the `(r, s)` phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curve {
    /// Upper edge of `M`.
    Sbar,
    /// Monotonicity threshold `g(r)`.
    Threshold,
    /// `1 - 4r/3`.
    Affine,
}

impl Curve {
    pub const ALL: [Curve; 3] = [Curve::Sbar, Curve::Threshold, Curve::Affine];

    pub fn name(self) -> &'static str {
        match self {
            Curve::Sbar => "sbar",
            Curve::Threshold => "g",
            Curve::Affine => "affine",
        }
    }

    /// `None` where the curve is undefined at `r`.
    pub fn eval<C: ScalarContext>(self, ctx: &C, r: &C::Scalar) -> Option<C::Scalar> {
        match self {
            Curve::Sbar => sbar(ctx, r).ok(),
            Curve::Threshold => threshold_g(ctx, r).ok(),
            Curve::Affine => Some(ctx.one() - ctx.ratio(4, 3) * r),
        }
    }
}

/// Samples every curve at `r_i = r_max * i / n`, `i = 1..=n`, skipping
/// points where a curve is undefined.
pub fn sample_curves<C: ScalarContext>(ctx: &C, n: usize, r_max: &C::Scalar) -> Vec<(Curve, C::Scalar, C::Scalar)> {
    let mut out = Vec::with_capacity(3 * n);
    for curve in Curve::ALL {
        for i in 1..=n {
            let r = r_max.clone() * ctx.from_i64(i as i64) / ctx.from_i64(n as i64);
            if let Some(s) = curve.eval(ctx, &r) {
                out.push((curve, r, s));
            }
        }
    }
    out
}
