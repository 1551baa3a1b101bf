//! Backward-forward construction of slow line-search trajectories and the
//! certificate that a replayed trajectory obeys the `Omega(1/t^2)` invariants.
//!
//! The construction starts at a terminal state `(eps, 1 - 4/3 eps + 2 eps^2)`
//! and walks `G` backwards until the residual reaches `r_max`. Replaying the
//! start through `F` retraces the same states in reverse, but only if the
//! arithmetic carries roughly one extra bit per step.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{
    backward, backward_xy, forward, ls_polar_step, polar_step, reconstruct_theta, PolarStep, RSState,
};
use crate::error::{Error, Result};
use crate::fwcore::{ls_gamma, PolarState};
use crate::numeric::{PrecisionConfig, PrecisionMode, Scalar, ScalarContext};

/// `1 / (10 + 8T/3)`, evaluated as `3 / (30 + 8T)`.
pub fn choose_epsilon<C: ScalarContext>(ctx: &C, horizon: u64) -> C::Scalar {
    ctx.from_i64(3) / (ctx.from_i64(30) + ctx.from_i64(8) * ctx.from_i64(horizon as i64))
}

/// Default width for a construction of horizon `T`: `max(256, 2T + 64)`.
pub fn default_bits(horizon: u64) -> u32 {
    let want = 2 * horizon + 64;
    u32::try_from(want).unwrap_or(u32::MAX).max(256)
}

/// Default precision for a construction of horizon `T`.
pub fn default_precision(horizon: u64) -> PrecisionConfig {
    PrecisionConfig::extended(default_bits(horizon))
}

#[derive(Debug, Clone)]
pub struct ConstructionParams<S> {
    pub horizon: u64,
    /// Terminal residual; [`choose_epsilon`] when absent.
    pub epsilon: Option<S>,
    pub r_max: S,
    /// Bound on backward steps, guarding against a stalled recursion.
    pub step_cap: usize,
}

impl<S: Scalar> ConstructionParams<S> {
    pub fn new<C: ScalarContext<Scalar = S>>(ctx: &C, horizon: u64) -> Self {
        Self {
            horizon,
            epsilon: None,
            r_max: ctx.ratio(1, 10),
            step_cap: 4 * horizon as usize + 1000,
        }
    }

    pub fn epsilon<C: ScalarContext<Scalar = S>>(&self, ctx: &C) -> S {
        self.epsilon
            .clone()
            .unwrap_or_else(|| choose_epsilon(ctx, self.horizon))
    }

    /// `0 < eps <= r_max <= 1/10`.
    pub fn validate<C: ScalarContext<Scalar = S>>(&self, ctx: &C) -> Result<()> {
        let eps = self.epsilon(ctx);
        if eps <= ctx.zero() || eps > self.r_max {
            return Err(Error::OutOfRange {
                what: "epsilon",
                value: ctx.to_decimal(&eps),
            });
        }
        if self.r_max > ctx.ratio(1, 10) {
            return Err(Error::OutOfRange {
                what: "r_max",
                value: ctx.to_decimal(&self.r_max),
            });
        }
        Ok(())
    }
}

/// Result of the backward pass.
#[derive(Debug, Clone)]
pub struct Construction<S> {
    pub epsilon: S,
    /// `backward[k]` is `G^k(endpoint)`; the last entry is the first state
    /// with `r >= r_max` (absent only when the endpoint itself qualifies).
    pub backward: Vec<RSState<S>>,
    /// Backward length: `backward[t_hat]` is the last state with `r < r_max`.
    pub t_hat: usize,
}

impl<S: Scalar> Construction<S> {
    pub fn endpoint(&self) -> &RSState<S> {
        &self.backward[0]
    }

    /// The start `(r_0, s_0)`: the last backward state below `r_max`.
    pub fn start(&self) -> &RSState<S> {
        &self.backward[self.t_hat]
    }

    /// The first backward state at or above `r_max`, as returned by the
    /// printed form of the algorithm.
    pub fn overshoot(&self) -> Option<&RSState<S>> {
        (self.backward.len() > self.t_hat + 1).then(|| &self.backward[self.t_hat + 1])
    }

    /// Backward states `t_hat, ..., 0`, i.e. the forward-time order.
    pub fn forward_order(&self) -> impl Iterator<Item = &RSState<S>> {
        self.backward[..=self.t_hat].iter().rev()
    }
}

pub fn endpoint<C: ScalarContext>(ctx: &C, eps: &C::Scalar) -> RSState<C::Scalar> {
    let s = ctx.one() - ctx.ratio(4, 3) * eps + ctx.from_i64(2) * eps.square();
    RSState::new(eps.clone(), s)
}

/// Walks `G` back from the endpoint until `r >= r_max`.
pub fn alg1_construct<C: ScalarContext>(
    ctx: &C,
    params: &ConstructionParams<C::Scalar>,
) -> Result<Construction<C::Scalar>> {
    params.validate(ctx)?;
    if ctx.config().mode == PrecisionMode::Hardware {
        warn!("backward construction at hardware precision; the replay will not track it");
    }
    let eps = params.epsilon(ctx);
    let mut seq = vec![endpoint(ctx, &eps)];
    loop {
        let last = seq.last().expect("nonempty");
        if last.r >= params.r_max {
            break;
        }
        let step = seq.len();
        if step > params.step_cap {
            return Err(Error::Construction {
                step,
                source: Box::new(Error::OutOfRange {
                    what: "backward steps",
                    value: step.to_string(),
                }),
            });
        }
        let prev = backward(ctx, last).map_err(|e| Error::Construction {
            step,
            source: Box::new(e),
        })?;
        seq.push(prev);
    }
    let t_hat = seq.len().saturating_sub(2);
    Ok(Construction {
        epsilon: eps,
        backward: seq,
        t_hat,
    })
}

/// Forward orbit that stops at the first domain exit instead of failing.
#[derive(Debug, Clone)]
pub struct Orbit<S> {
    pub states: Vec<RSState<S>>,
    /// Step at which `F` was refused, with the reason.
    pub exit: Option<(usize, String)>,
}

pub fn forward_orbit<C: ScalarContext>(ctx: &C, start: &RSState<C::Scalar>, steps: usize) -> Orbit<C::Scalar> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(start.clone());
    for t in 0..steps {
        match forward(ctx, &states[t]) {
            Ok(next) => states.push(next),
            Err(e) => {
                return Orbit {
                    states,
                    exit: Some((t, e.to_string())),
                }
            }
        }
    }
    Orbit { states, exit: None }
}

/// `[start, F(start), ..., F^T(start)]`.
pub fn forward_replay<C: ScalarContext>(
    ctx: &C,
    start: &RSState<C::Scalar>,
    horizon: usize,
) -> Result<Vec<RSState<C::Scalar>>> {
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(start.clone());
    for t in 0..horizon {
        let next = forward(ctx, &states[t]).map_err(|e| Error::Construction {
            step: t,
            source: Box::new(e),
        })?;
        states.push(next);
    }
    Ok(states)
}

/// Largest componentwise deviation between `replay[t]` and `backward[t_hat - t]`.
pub fn roundtrip_error<C: ScalarContext>(
    ctx: &C,
    construction: &Construction<C::Scalar>,
    replay: &[RSState<C::Scalar>],
) -> C::Scalar {
    construction
        .forward_order()
        .zip(replay)
        .fold(ctx.zero(), |acc, (b, f)| {
            acc.max_of((b.r.clone() - &f.r).abs())
                .max_of((b.s.clone() - &f.s).abs())
        })
}

/// Replays `start` in polar coordinates with every line-search stepsize
/// multiplied by `scale`, and reports up to `T + 1` states `(r_t, r_{t+1}/r_t)`.
pub fn perturbed_replay<C: ScalarContext>(
    ctx: &C,
    start: &RSState<C::Scalar>,
    horizon: usize,
    scale: &C::Scalar,
) -> Result<Vec<RSState<C::Scalar>>> {
    let theta = reconstruct_theta(ctx, start)?;
    let mut polar = vec![PolarState {
        r: start.r.clone(),
        theta,
    }];
    let exact = scale == &ctx.one();
    // One extra step so the last state has a contraction.
    for _ in 0..=horizon {
        let cur = polar.last().expect("nonempty");
        let next = if exact {
            ls_polar_step(ctx, cur)
        } else {
            let gamma = (ls_gamma(ctx, cur) * scale).min_of(ctx.one());
            polar_step(ctx, cur, &gamma)
        };
        match next {
            PolarStep::Next(p) => polar.push(p),
            PolarStep::Terminated => break,
        }
    }
    Ok(polar
        .windows(2)
        .map(|w| RSState::new(w[0].r.clone(), w[1].r.clone() / &w[0].r))
        .collect())
}

/// Point of the default 2-D instance (`p = (0, 1)`) with polar state
/// `(r, reconstruct_theta(r, s))`.
pub fn embed_start<C: ScalarContext>(ctx: &C, start: &RSState<C::Scalar>) -> Result<Vec<C::Scalar>> {
    let theta = reconstruct_theta(ctx, start)?;
    let sin = (ctx.one() - theta.square()).max_of(ctx.zero()).sqrt();
    Ok(vec![start.r.clone() * sin, ctx.one() + start.r.clone() * theta])
}

/// Tolerance on the `c_t` range and the `r_0` floor.
pub fn certificate_tolerance(cfg: PrecisionConfig) -> f64 {
    match cfg.mode {
        PrecisionMode::Hardware => 1e-3,
        PrecisionMode::Extended => 1e-6,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Check `r_0 >= 1/18 - tol` (meaningful for constructions with `r_max = 1/10`).
    pub check_r0_floor: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { check_r0_floor: true }
    }
}

#[derive(Debug, Clone)]
pub struct LowerBoundCertificate<S> {
    pub horizon: usize,
    pub r0: S,
    pub s0: S,
    pub t_hat: Option<usize>,
    /// `s_0 <= ... <= s_{T-1}`.
    pub monotone_s: bool,
    /// First `t` with `s_{t+1} < s_t`.
    pub first_decrease: Option<usize>,
    /// `r_t >= r_0 / (1 + 8/3 r_0 t)` for all `t <= T`.
    pub residual_bound_ok: bool,
    pub first_residual_violation: Option<usize>,
    pub c_range_ok: bool,
    pub c_min: Option<S>,
    pub c_max: Option<S>,
    pub first_c_violation: Option<usize>,
    pub r0_floor_ok: bool,
    pub r0_floor_checked: bool,
    pub roundtrip_max_err: Option<S>,
    /// Least-squares slope of `log r_t^2` against `log t` over `[T/10, T]`; NaN with fewer than two points.
    pub slope_estimate: f64,
    pub tol_c: f64,
    pub precision: PrecisionConfig,
    /// States actually available (the replay may be shorter than `T + 1`).
    pub replay_len: usize,
}

impl<S: Scalar> LowerBoundCertificate<S> {
    pub fn passes(&self) -> bool {
        self.monotone_s && self.residual_bound_ok && self.c_range_ok && self.r0_floor_ok
    }

    /// JSON object with every scalar as a full-precision decimal string; NaN slope becomes `null`.
    pub fn to_json<C: ScalarContext<Scalar = S>>(&self, ctx: &C) -> Value {
        let dec = |x: &S| Value::String(ctx.to_decimal(x));
        let opt = |x: &Option<S>| x.as_ref().map(dec).unwrap_or(Value::Null);
        let slope = if self.slope_estimate.is_finite() {
            json!(self.slope_estimate)
        } else {
            Value::Null
        };
        json!({
            "passes": self.passes(),
            "horizon": self.horizon,
            "r0": dec(&self.r0),
            "s0": dec(&self.s0),
            "T_hat": self.t_hat,
            "monotone_s": self.monotone_s,
            "first_decrease": self.first_decrease,
            "residual_bound_ok": self.residual_bound_ok,
            "first_residual_violation": self.first_residual_violation,
            "c_range_ok": self.c_range_ok,
            "c_min": opt(&self.c_min),
            "c_max": opt(&self.c_max),
            "first_c_violation": self.first_c_violation,
            "r0_floor_ok": self.r0_floor_ok,
            "r0_floor_checked": self.r0_floor_checked,
            "roundtrip_max_err": opt(&self.roundtrip_max_err),
            "slope_estimate": slope,
            "tol_c": self.tol_c,
            "replay_len": self.replay_len,
            "precision": self.precision,
        })
    }
}

/// Checks the invariants on `replay[0..=T]`. Failures are recorded, never
/// raised. A replay shorter than `T + 1` fails `monotone_s` and
/// `residual_bound_ok` unless `T = 0`.
pub fn certify<C: ScalarContext>(
    ctx: &C,
    replay: &[RSState<C::Scalar>],
    horizon: usize,
    opts: CertifyOptions,
) -> LowerBoundCertificate<C::Scalar> {
    let tol_c = certificate_tolerance(ctx.config());
    let tol = ctx.from_f64(tol_c);
    let start = &replay[0];
    let (r0, s0) = (start.r.clone(), start.s.clone());
    let upto = horizon.min(replay.len() - 1);
    let truncated = replay.len() < horizon + 1;

    let first_decrease = (1..horizon.min(replay.len()))
        .find(|&t| replay[t].s < replay[t - 1].s)
        .map(|t| t - 1);
    let monotone_s = first_decrease.is_none() && !(truncated && horizon > 0);

    let eight_thirds = ctx.ratio(8, 3);
    let first_residual_violation = (0..=upto).find(|&t| {
        let bound = r0.clone() / (ctx.one() + eight_thirds.clone() * &r0 * ctx.from_i64(t as i64));
        replay[t].r < bound
    });
    let residual_bound_ok = first_residual_violation.is_none() && !(truncated && horizon > 0);

    let tenth = ctx.ratio(1, 10);
    let four_thirds = ctx.ratio(4, 3);
    let (lo, hi) = (ctx.one() - &tol, ctx.ratio(5, 2) + &tol);
    let mut c_min: Option<C::Scalar> = None;
    let mut c_max: Option<C::Scalar> = None;
    let mut first_c_violation = None;
    for (t, st) in replay[..=upto].iter().enumerate() {
        if st.r > tenth || st.r.is_zero() {
            continue;
        }
        let c = (st.s.clone() - ctx.one() + four_thirds.clone() * &st.r) / st.r.square();
        if first_c_violation.is_none() && (c < lo || c > hi) {
            first_c_violation = Some(t);
        }
        c_min = Some(match c_min {
            Some(m) => m.min_of(c.clone()),
            None => c.clone(),
        });
        c_max = Some(match c_max {
            Some(m) => m.max_of(c),
            None => c,
        });
    }

    let r0_floor_ok = !opts.check_r0_floor || r0 >= ctx.ratio(1, 18) - &tol;

    LowerBoundCertificate {
        horizon,
        r0,
        s0,
        t_hat: None,
        monotone_s,
        first_decrease,
        residual_bound_ok,
        first_residual_violation,
        c_range_ok: first_c_violation.is_none(),
        c_min,
        c_max,
        first_c_violation,
        r0_floor_ok,
        r0_floor_checked: opts.check_r0_floor,
        roundtrip_max_err: None,
        slope_estimate: log_log_slope(&replay[..=upto], horizon),
        tol_c,
        precision: ctx.config(),
        replay_len: replay.len(),
    }
}

/// Least-squares slope of `ln(r_t^2)` against `ln t` for `t` in `[max(1, T/10), T]`.
fn log_log_slope<S: Scalar>(replay: &[RSState<S>], horizon: usize) -> f64 {
    let lo = (horizon / 10).max(1);
    let pts: Vec<(f64, f64)> = (lo..=horizon.min(replay.len().saturating_sub(1)))
        .filter_map(|t| {
            let r = replay[t].r.to_f64_lossy();
            (r > 0.0).then(|| ((t as f64).ln(), 2.0 * r.ln()))
        })
        .collect();
    least_squares_slope(&pts)
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Full pipeline: construct, replay `T` steps from the start, certify, and
/// attach `T_hat` and the round-trip error.
#[derive(Debug, Clone)]
pub struct WorstCaseRun<S> {
    pub construction: Construction<S>,
    pub replay: Vec<RSState<S>>,
    pub replay_exit: Option<(usize, String)>,
    pub certificate: LowerBoundCertificate<S>,
}

pub fn run_worstcase<C: ScalarContext>(
    ctx: &C,
    params: &ConstructionParams<C::Scalar>,
) -> Result<WorstCaseRun<C::Scalar>> {
    let construction = alg1_construct(ctx, params)?;
    let horizon = params.horizon as usize;
    let orbit = forward_orbit(ctx, construction.start(), horizon);
    let opts = CertifyOptions {
        check_r0_floor: params.r_max == ctx.ratio(1, 10),
    };
    let mut certificate = certify(ctx, &orbit.states, horizon, opts);
    certificate.t_hat = Some(construction.t_hat);
    certificate.roundtrip_max_err = Some(roundtrip_error(ctx, &construction, &orbit.states));
    Ok(WorstCaseRun {
        construction,
        replay: orbit.states,
        replay_exit: orbit.exit,
        certificate,
    })
}

/// Outcome of the `(r, c)` grid checks of the second-order invariant.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaGridReport {
    pub points: usize,
    /// `X + Y >= 5/12` at every grid point.
    pub xy_floor_ok: bool,
    pub xy_min: f64,
    /// `X + Y` inside the cubic band around `1 - 4/3 r + (11/9 - c/2) r^2`.
    pub xy_band_ok: bool,
    /// Smallest slack to either band edge, in units of `r^3`.
    pub xy_band_margin: f64,
    /// Backward step keeps `c'` in `[1, 5/2]`.
    pub c_next_ok: bool,
    pub c_next_min: f64,
    pub c_next_max: f64,
    pub failures: Vec<String>,
}

impl LemmaGridReport {
    pub fn passes(&self) -> bool {
        self.xy_floor_ok && self.xy_band_ok && self.c_next_ok
    }
}

struct GridPoint {
    xy: f64,
    band_margin: f64,
    c_next: f64,
    failures: Vec<String>,
}

/// Grid `r_i = i/(10 nr)`, `i = 1..=nr`, and `c_j = 1 + 3j/(2 (nc - 1))`,
/// `j = 0..nc`, with `s = 1 - 4/3 r + c r^2`. Rows run in parallel.
pub fn lemma_grid<C: ScalarContext>(ctx: &C, nr: usize, nc: usize, tol: f64) -> Result<LemmaGridReport> {
    let rows: Vec<Result<Vec<GridPoint>>> = (1..=nr)
        .into_par_iter()
        .map(|i| {
            let ctx = ctx.clone();
            (0..nc).map(|j| grid_point(&ctx, i, nr, j, nc, tol)).collect()
        })
        .collect();
    let mut rep = LemmaGridReport {
        points: 0,
        xy_floor_ok: true,
        xy_min: f64::INFINITY,
        xy_band_ok: true,
        xy_band_margin: f64::INFINITY,
        c_next_ok: true,
        c_next_min: f64::INFINITY,
        c_next_max: f64::NEG_INFINITY,
        failures: Vec::new(),
    };
    for row in rows {
        for pt in row? {
            rep.points += 1;
            rep.xy_min = rep.xy_min.min(pt.xy);
            rep.xy_band_margin = rep.xy_band_margin.min(pt.band_margin);
            rep.c_next_min = rep.c_next_min.min(pt.c_next);
            rep.c_next_max = rep.c_next_max.max(pt.c_next);
            rep.failures.extend(pt.failures);
        }
    }
    rep.xy_floor_ok = rep.xy_min >= 5.0 / 12.0 - tol;
    rep.xy_band_ok = !rep.failures.iter().any(|f| f.starts_with("band"));
    rep.c_next_ok = rep.c_next_min >= 1.0 - tol && rep.c_next_max <= 2.5 + tol;
    Ok(rep)
}

fn grid_point<C: ScalarContext>(ctx: &C, i: usize, nr: usize, j: usize, nc: usize, tol: f64) -> Result<GridPoint> {
    let r = ctx.from_i64(i as i64) / ctx.from_i64(10 * nr as i64);
    let c = ctx.one() + ctx.from_i64(3 * j as i64) / ctx.from_i64(2 * (nc as i64 - 1).max(1));
    let r2 = r.square();
    let r3 = r2.clone() * &r;
    let s = ctx.one() - ctx.ratio(4, 3) * &r + c.clone() * &r2;
    let st = RSState::new(r.clone(), s);
    let (x, y) = backward_xy(ctx, &st)?;
    let xy = x + y;
    let centre = ctx.one() - ctx.ratio(4, 3) * &r + (ctx.ratio(11, 9) - c.clone() / ctx.from_i64(2)) * &r2;
    let tol_s = ctx.from_f64(tol);
    let below = xy.clone() - (centre.clone() - ctx.from_i64(5) * &r3);
    let above = (centre + ctx.from_i64(2) * &r3) - &xy;
    let mut failures = Vec::new();
    if below < -tol_s.clone() || above < -tol_s {
        failures.push(format!("band at r={}, c={}", r.to_f64_lossy(), c.to_f64_lossy()));
    }
    let band_margin = (below.min_of(above) / &r3).to_f64_lossy();
    let prev = backward(ctx, &st)?;
    let c_next = (prev.s - ctx.one() + ctx.ratio(4, 3) * &prev.r) / prev.r.square();
    Ok(GridPoint {
        xy: xy.to_f64_lossy(),
        band_margin,
        c_next: c_next.to_f64_lossy(),
        failures,
    })
}
