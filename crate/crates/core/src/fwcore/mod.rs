//! Vector-space Frank-Wolfe on the ball model problem and on ellipsoids.

pub mod export;
pub mod instance;
pub mod linalg;
pub mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Scalar, ScalarContext};
use linalg::{dot, norm, sub};

pub use instance::{map_to_ball, BallInstance, EllipsoidInstance, Instance, LinearMap};
pub use solver::{
    run_fw, verify_affine_equivalence, AffineReport, Record, RunOptions, StepRule, StopReason, Trajectory,
};

/// Polar coordinates of an iterate relative to a unit target `p`:
/// `r = |x - p|`, `theta = <x - p, p> / r`.
///
/// Feasible states satisfy `-1 <= theta <= -r/2`; `r = 0` is termination and
/// never stored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarState<S> {
    pub r: S,
    pub theta: S,
}

impl<S: Scalar> PolarState<S> {
    /// Checks the feasibility invariants with the context slack.
    pub fn new<C: ScalarContext<Scalar = S>>(ctx: &C, r: S, theta: S) -> Result<Self> {
        let slack = ctx.slack();
        let two = ctx.from_i64(2);
        let ok = r > ctx.zero()
            && r <= two.clone() + &slack
            && theta >= -(ctx.one() + &slack)
            && theta <= -(r.clone() / &two) + &slack;
        if !ok {
            return Err(Error::DomainViolation {
                domain: "polar feasibility",
                r: ctx.to_decimal(&r),
                s: ctx.to_decimal(&theta),
            });
        }
        Ok(Self { r, theta })
    }
}

/// Ball LMO at the gradient direction `x - p`: `-(x - p)/|x - p|`.
pub fn lmo_ball<C: ScalarContext>(ctx: &C, x: &[C::Scalar], p: &[C::Scalar]) -> Result<Vec<C::Scalar>> {
    let d = sub(x, p);
    let n = norm(ctx, &d);
    if n <= ctx.termination_threshold() {
        return Err(Error::Termination);
    }
    Ok(d.into_iter().map(|v| -(v / &n)).collect())
}

pub fn to_polar<C: ScalarContext>(ctx: &C, x: &[C::Scalar], p: &[C::Scalar]) -> Result<PolarState<C::Scalar>> {
    let d = sub(x, p);
    let r = norm(ctx, &d);
    if r <= ctx.termination_threshold() {
        return Err(Error::Termination);
    }
    // Cauchy-Schwarz can be violated by one ulp.
    let theta = (dot(ctx, &d, p) / &r).max_of(-ctx.one());
    Ok(PolarState { r, theta })
}

/// Exact line-search step on the default ball instance; equals 1 iff `theta = -1`.
pub fn ls_gamma<C: ScalarContext>(ctx: &C, state: &PolarState<C::Scalar>) -> C::Scalar {
    let one = ctx.one();
    let rp1 = one.clone() + &state.r;
    let num = state.r.clone() * (rp1.clone() + &state.theta);
    let den = rp1.square() + &one + ctx.from_i64(2) * &rp1 * &state.theta;
    if den <= ctx.zero() {
        return one;
    }
    (num / den).min_of(one)
}

/// `min{1, <grad, x - v> / (L |x - v|^2)}`, floored at 0.
pub fn short_step_gamma<C: ScalarContext>(
    ctx: &C,
    x: &[C::Scalar],
    v: &[C::Scalar],
    grad: &[C::Scalar],
    lipschitz: &C::Scalar,
) -> Result<C::Scalar> {
    let d = sub(x, v);
    let dd = dot(ctx, &d, &d);
    if dd.sqrt() <= ctx.termination_threshold() {
        return Err(Error::DegenerateDirection);
    }
    let ratio = dot(ctx, grad, &d) / (lipschitz.clone() * dd);
    Ok(ratio.min_of(ctx.one()).max_of(ctx.zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{ExtendedContext, HardwareContext};
    use approx::assert_relative_eq;

    #[test]
    fn lmo_examples() {
        let ctx = HardwareContext;
        assert_eq!(lmo_ball(&ctx, &[0.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        let v = lmo_ball(&ctx, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(v[0], -h, max_relative = 1e-15);
        assert_relative_eq!(v[1], h, max_relative = 1e-15);
        assert!(matches!(
            lmo_ball(&ctx, &[0.0, 1.0], &[0.0, 1.0]),
            Err(Error::Termination)
        ));
    }

    #[test]
    fn polar_examples() {
        let ctx = HardwareContext;
        let p = [0.0, 1.0];
        assert_eq!(
            to_polar(&ctx, &[0.0, 0.0], &p).unwrap(),
            PolarState { r: 1.0, theta: -1.0 }
        );
        let s = to_polar(&ctx, &[1.0, 0.0], &p).unwrap();
        assert_relative_eq!(s.r, 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(s.theta, -std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_eq!(
            to_polar(&ctx, &[0.0, -1.0], &p).unwrap(),
            PolarState { r: 2.0, theta: -1.0 }
        );
        assert!(to_polar(&ctx, &p, &p).is_err());
    }

    #[test]
    fn ls_gamma_examples() {
        let ctx = ExtendedContext::new(128).unwrap();
        let st = |r: (i64, i64), t: (i64, i64)| PolarState {
            r: ctx.ratio(r.0, r.1),
            theta: ctx.ratio(t.0, t.1),
        };
        assert_eq!(ls_gamma(&ctx, &st((1, 1), (-1, 2))), ctx.ratio(1, 2));
        assert_eq!(ls_gamma(&ctx, &st((1, 1), (-1, 1))), ctx.one());
        assert_eq!(ls_gamma(&ctx, &st((1, 2), (-1, 4))), ctx.ratio(1, 4));
    }

    #[test]
    fn short_step_matches_line_search_on_model() {
        let ctx = HardwareContext;
        let (x, p) = ([1.0, 0.0], [0.0, 1.0]);
        let v = lmo_ball(&ctx, &x, &p).unwrap();
        let g: Vec<f64> = x.iter().zip(&p).map(|(a, b)| 2.0 * (a - b)).collect();
        let ss = short_step_gamma(&ctx, &x, &v, &g, &2.0).unwrap();
        let ls = ls_gamma(&ctx, &to_polar(&ctx, &x, &p).unwrap());
        assert_relative_eq!(ss, ls, max_relative = 1e-14);
    }

    #[test]
    fn short_step_clamps() {
        let ctx = HardwareContext;
        // grad orthogonal to x - v
        assert_eq!(
            short_step_gamma(&ctx, &[1.0, 0.0], &[0.0, 0.0], &[0.0, 3.0], &1.0).unwrap(),
            0.0
        );
        assert_eq!(
            short_step_gamma(&ctx, &[1.0, 0.0], &[0.0, 0.0], &[100.0, 0.0], &1.0).unwrap(),
            1.0
        );
        assert!(matches!(
            short_step_gamma(&ctx, &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &1.0),
            Err(Error::DegenerateDirection)
        ));
    }

    #[test]
    fn polar_state_validation() {
        let ctx = HardwareContext;
        assert!(PolarState::new(&ctx, 1.0, -0.5).is_ok());
        assert!(PolarState::new(&ctx, 1.0, -0.4).is_err());
        assert!(PolarState::new(&ctx, 0.0, -1.0).is_err());
        assert!(PolarState::new(&ctx, 2.5, -1.0).is_err());
    }
}
