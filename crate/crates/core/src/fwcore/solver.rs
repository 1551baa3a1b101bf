//! The Frank-Wolfe loop `x_{t+1} = (1 - gamma_t) x_t + gamma_t v_t`, simulated
//! in the ambient space.

use serde::{Deserialize, Serialize};

use super::instance::{map_to_ball, BallInstance, EllipsoidInstance, Instance, LinearMap};
use super::linalg::{convex_step, dot, norm, sub};
use super::{ls_gamma, short_step_gamma, PolarState};
use crate::error::{Error, Result};
use crate::numeric::{PrecisionConfig, Scalar, ScalarContext};

#[derive(Debug, Clone, PartialEq)]
pub enum StepRule<S> {
    ExactLineSearch,
    ShortStep,
    /// Open list of stepsizes; `gamma_t = schedule[t]`.
    Schedule(Vec<S>),
}

impl<S> StepRule<S> {
    pub fn name(&self) -> &'static str {
        match self {
            StepRule::ExactLineSearch => "exact-line-search",
            StepRule::ShortStep => "short-step",
            StepRule::Schedule(_) => "schedule",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Horizon,
    GapReached,
    /// Residual at or below the termination threshold.
    Terminated,
    /// `|x - v|` vanished before the residual did.
    Degenerate,
}

/// One iterate. `theta` is absent once the residual is below the termination
/// threshold; `s` and `gamma` are absent on the last record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<S> {
    pub t: usize,
    pub r: S,
    pub theta: Option<S>,
    pub s: Option<S>,
    pub gamma: Option<S>,
    pub gap: S,
    pub x: Option<Vec<S>>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub records: Vec<Record<S>>,
    pub stop: StopReason,
    pub rule: &'static str,
    pub dimension: usize,
    pub precision: PrecisionConfig,
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record<S>> {
        self.records.last()
    }

    pub fn residuals(&self) -> impl Iterator<Item = &S> {
        self.records.iter().map(|r| &r.r)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions<S> {
    /// Maximum number of steps; the trajectory has at most `horizon + 1` records.
    pub horizon: usize,
    pub stop_gap: Option<S>,
    pub record_points: bool,
}

impl<S> RunOptions<S> {
    pub fn horizon(horizon: usize) -> Self {
        Self {
            horizon,
            stop_gap: None,
            record_points: false,
        }
    }

    pub fn with_points(mut self) -> Self {
        self.record_points = true;
        self
    }

    pub fn with_stop_gap(mut self, gap: S) -> Self {
        self.stop_gap = Some(gap);
        self
    }
}

/// Polar coordinates of the iterate, through `Phi` for ellipsoids.
struct PolarFrame<S> {
    ball: BallInstance<S>,
    map: Option<LinearMap<S>>,
    boundary: bool,
}

impl<S: Scalar> PolarFrame<S> {
    fn new<C: ScalarContext<Scalar = S>>(ctx: &C, inst: &Instance<S>) -> Result<Self> {
        let (ball, map) = match inst {
            Instance::Ball(b) => (b.clone(), None),
            Instance::Ellipsoid(e) => {
                let (b, m) = map_to_ball(ctx, e)?;
                (b, Some(m))
            }
        };
        let boundary = ball.boundary_target(ctx);
        Ok(Self { ball, map, boundary })
    }

    fn residual<C: ScalarContext<Scalar = S>>(&self, ctx: &C, x: &[S]) -> (S, Option<S>) {
        let u = match &self.map {
            Some(m) => m.apply(ctx, x),
            None => x.to_vec(),
        };
        match self.ball.polar(ctx, &u) {
            Ok(PolarState { r, theta }) => (r, Some(theta)),
            Err(_) => {
                let scaled: Vec<S> = u.iter().map(|v| v.clone() / &self.ball.radius).collect();
                (norm(ctx, &sub(&scaled, &self.ball.target)), None)
            }
        }
    }
}

/// Runs Frank-Wolfe from `x0` for at most `opts.horizon` steps.
///
/// Exact line search on a sphere-target ball uses the closed-form polar step
/// size; every other case minimises the quadratic exactly along the segment.
pub fn run_fw<C: ScalarContext>(
    ctx: &C,
    inst: &Instance<C::Scalar>,
    x0: &[C::Scalar],
    rule: &StepRule<C::Scalar>,
    opts: &RunOptions<C::Scalar>,
) -> Result<Trajectory<C::Scalar>> {
    let d = inst.dimension();
    if x0.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x0.len(),
        });
    }
    let load = inst.constraint(ctx, x0);
    if load > ctx.one() + ctx.slack() {
        return Err(Error::Infeasible(ctx.to_decimal(&load)));
    }
    if let StepRule::Schedule(gs) = rule {
        if gs.len() < opts.horizon {
            return Err(Error::ScheduleTooShort {
                needed: opts.horizon,
                got: gs.len(),
            });
        }
    }
    let frame = PolarFrame::new(ctx, inst)?;
    let closed_form = matches!(inst, Instance::Ball(_)) && frame.boundary;
    let lipschitz = inst.lipschitz();

    let mut x = x0.to_vec();
    let mut records: Vec<Record<C::Scalar>> = Vec::with_capacity(opts.horizon.min(1 << 16) + 1);
    let stop = loop {
        let t = records.len();
        let (r, theta) = frame.residual(ctx, &x);
        let gap = inst.gap(ctx, &x);
        let done = theta.is_none();
        records.push(Record {
            t,
            r,
            theta: theta.clone(),
            s: None,
            gamma: None,
            gap: gap.clone(),
            x: opts.record_points.then(|| x.clone()),
        });
        if done {
            break StopReason::Terminated;
        }
        if t == opts.horizon {
            break StopReason::Horizon;
        }
        if opts.stop_gap.as_ref().is_some_and(|sg| gap <= *sg) {
            break StopReason::GapReached;
        }
        let g = inst.gradient(ctx, &x);
        let v = match inst.lmo(ctx, &g) {
            Ok(v) => v,
            Err(Error::Termination) => break StopReason::Terminated,
            Err(e) => return Err(e),
        };
        let gamma = match rule {
            StepRule::Schedule(gs) => gs[t].clone(),
            StepRule::ShortStep => match short_step_gamma(ctx, &x, &v, &g, &lipschitz) {
                Ok(gm) => gm,
                Err(Error::DegenerateDirection) => break StopReason::Degenerate,
                Err(e) => return Err(e),
            },
            StepRule::ExactLineSearch => {
                let theta = theta.expect("checked above");
                // Near-collinear states are not special-cased: the closed form
                // already gives gamma = 1 at theta = -1, and forcing it for
                // theta = -1 + delta overshoots once delta ~ r^2.
                if closed_form {
                    let r = records[t].r.clone();
                    ls_gamma(ctx, &PolarState { r, theta })
                } else {
                    let dir = sub(&x, &v);
                    let curv = inst.curvature(ctx, &dir);
                    if curv.sqrt() <= ctx.termination_threshold() {
                        break StopReason::Degenerate;
                    }
                    (dot(ctx, &g, &dir) / curv).min_of(ctx.one()).max_of(ctx.zero())
                }
            }
        };
        x = convex_step(ctx, &x, &v, &gamma);
        records[t].gamma = Some(gamma);
    };

    for t in 0..records.len().saturating_sub(1) {
        if !records[t].r.is_zero() {
            let s = records[t + 1].r.clone() / &records[t].r;
            records[t].s = Some(s);
        }
    }
    Ok(Trajectory {
        records,
        stop,
        rule: rule.name(),
        dimension: d,
        precision: ctx.config(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineReport {
    /// Records compared (common prefix of both runs).
    pub steps: usize,
    pub max_gap_deviation: f64,
    pub max_iterate_deviation: f64,
}

/// Runs exact line search on `inst` and on its mapped ball from `Phi x0`,
/// and compares gaps and mapped iterates step by step.
pub fn verify_affine_equivalence<C: ScalarContext>(
    ctx: &C,
    inst: &EllipsoidInstance<C::Scalar>,
    x0: &[C::Scalar],
    horizon: usize,
) -> Result<AffineReport> {
    let (ball, map) = map_to_ball(ctx, inst)?;
    let opts = RunOptions::horizon(horizon).with_points();
    let rule = StepRule::ExactLineSearch;
    let lhs = run_fw(ctx, &Instance::Ellipsoid(inst.clone()), x0, &rule, &opts)?;
    let u0 = map.apply(ctx, x0);
    let rhs = run_fw(ctx, &Instance::Ball(ball), &u0, &rule, &opts)?;

    let steps = lhs.len().min(rhs.len());
    let mut gap_dev = ctx.zero();
    let mut iter_dev = ctx.zero();
    for (a, b) in lhs.records.iter().zip(&rhs.records) {
        gap_dev = gap_dev.max_of((a.gap.clone() - &b.gap).abs());
        let (xa, ub) = (a.x.as_ref().expect("recorded"), b.x.as_ref().expect("recorded"));
        iter_dev = iter_dev.max_of(norm(ctx, &sub(&map.apply(ctx, xa), ub)));
    }
    Ok(AffineReport {
        steps,
        max_gap_deviation: gap_dev.to_f64_lossy(),
        max_iterate_deviation: iter_dev.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fwcore::linalg::SymMatrix;
    use crate::numeric::{ExtendedContext, HardwareContext};

    fn model(ctx: &HardwareContext) -> Instance<f64> {
        Instance::Ball(BallInstance::model(ctx, vec![0.0, 1.0]).unwrap())
    }

    #[test]
    fn two_step_termination() {
        let ctx = HardwareContext;
        let r0 = 2f64.sqrt();
        let rule = StepRule::Schedule(vec![r0 / (1.0 + r0), 1.0]);
        let tr = run_fw(&ctx, &model(&ctx), &[1.0, 0.0], &rule, &RunOptions::horizon(2)).unwrap();
        assert!(tr.records[2].gap <= 2f64.powi(-40));
    }

    #[test]
    fn zero_schedule_is_constant() {
        let ctx = HardwareContext;
        let rule = StepRule::Schedule(vec![0.0; 5]);
        let tr = run_fw(
            &ctx,
            &model(&ctx),
            &[0.6, -0.3],
            &rule,
            &RunOptions::horizon(5).with_points(),
        )
        .unwrap();
        assert_eq!(tr.len(), 6);
        assert!(tr.records.iter().all(|r| r.x.as_deref() == Some(&[0.6, -0.3][..])));
    }

    #[test]
    fn first_line_search_step_from_east_pole() {
        let ctx = ExtendedContext::new(256).unwrap();
        let inst = Instance::Ball(BallInstance::model(&ctx, vec![ctx.zero(), ctx.one()]).unwrap());
        let tr = run_fw(
            &ctx,
            &inst,
            &[ctx.one(), ctx.zero()],
            &StepRule::ExactLineSearch,
            &RunOptions::horizon(1),
        )
        .unwrap();
        // r1^2 = 2 (1 - 1/2) / ((1 + sqrt2)^2 + 1 - sqrt2 (1 + sqrt2))
        let s2 = ctx.from_i64(2).sqrt();
        let den = (ctx.one() + &s2).square() + ctx.one() - s2.clone() * (ctx.one() + &s2);
        let want = ctx.one() / den;
        let got = tr.records[1].r.square();
        assert!((got - want).abs() < ctx.pow2(-240));
    }

    #[test]
    fn collinear_start_finishes_in_one_step() {
        let ctx = HardwareContext;
        let tr = run_fw(
            &ctx,
            &model(&ctx),
            &[0.0, -0.5],
            &StepRule::ExactLineSearch,
            &RunOptions::horizon(10),
        )
        .unwrap();
        assert_eq!(tr.stop, StopReason::Terminated);
        assert_eq!(tr.len(), 2);
    }

    #[test]
    fn start_at_target_is_terminal() {
        let ctx = HardwareContext;
        let tr = run_fw(
            &ctx,
            &model(&ctx),
            &[0.0, 1.0],
            &StepRule::ExactLineSearch,
            &RunOptions::horizon(10),
        )
        .unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.records[0].gap, 0.0);
        assert_eq!(tr.stop, StopReason::Terminated);
    }

    #[test]
    fn input_errors() {
        let ctx = HardwareContext;
        let inst = model(&ctx);
        assert!(matches!(
            run_fw(
                &ctx,
                &inst,
                &[1.0, 1.0],
                &StepRule::ExactLineSearch,
                &RunOptions::horizon(1)
            ),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            run_fw(
                &ctx,
                &inst,
                &[0.5, 0.0],
                &StepRule::Schedule(vec![0.5]),
                &RunOptions::horizon(3)
            ),
            Err(Error::ScheduleTooShort { needed: 3, got: 1 })
        ));
        assert!(matches!(
            run_fw(&ctx, &inst, &[0.5], &StepRule::ShortStep, &RunOptions::horizon(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn affine_equivalence_identity_and_diagonal() {
        let ctx = HardwareContext;
        let id = EllipsoidInstance::new(&ctx, SymMatrix::identity(&ctx, 2), 2.0, vec![0.0, -2.0]).unwrap();
        let rep = verify_affine_equivalence(&ctx, &id, &[1.0, 0.0], 30).unwrap();
        assert!(rep.max_gap_deviation < 1e-14 && rep.max_iterate_deviation < 1e-12);

        let a = SymMatrix::diagonal(&ctx, vec![4.0, 1.0]);
        let e = EllipsoidInstance::new(&ctx, a, 1.0, vec![0.0, -1.0]).unwrap();
        let rep = verify_affine_equivalence(&ctx, &e, &[0.5, 0.0], 50).unwrap();
        assert_eq!(rep.steps, 51);
        assert!(rep.max_gap_deviation <= 1e-8, "{rep:?}");
    }
}
