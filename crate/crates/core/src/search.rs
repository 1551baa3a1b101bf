//! Stable-phase length of forward orbits and searches for starts that
//! maximise it.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{forward, in_m, sbar, threshold_g, Domain, RSState};
use crate::error::{Error, Result};
use crate::numeric::{HardwareContext, Scalar, ScalarContext};

pub const DEFAULT_CAP: usize = 10_000;
pub const DEFAULT_GRID_N: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SearchResult<S> {
    pub s0: S,
    /// Largest `k` with `s_0 <= s_1 <= ... <= s_k`.
    pub tau: usize,
    /// The count stopped at the cap, so `tau` is only a lower bound.
    pub censored: bool,
    /// `(r_t, s_t)` for `t = 0..=tau`, when requested.
    pub trace: Option<Vec<RSState<S>>>,
}

/// Iterates `F` from `(r0, s0)` while the contraction is nondecreasing.
/// A domain exit ends the count like a decrease does.
pub fn stable_phase_length<C: ScalarContext>(
    ctx: &C,
    r0: &C::Scalar,
    s0: &C::Scalar,
    cap: usize,
    keep_trace: bool,
) -> Result<SearchResult<C::Scalar>> {
    let start = RSState::in_m(ctx, r0.clone(), s0.clone())?;
    let mut trace = keep_trace.then(|| vec![start.clone()]);
    let mut cur = start;
    let mut tau = 0;
    let mut censored = false;
    loop {
        if tau >= cap {
            censored = true;
            break;
        }
        let Ok(next) = forward(ctx, &cur) else { break };
        // `r' = 0` (termination) leaves M too.
        if next.domain != Domain::M || next.s < cur.s {
            break;
        }
        tau += 1;
        if let Some(t) = trace.as_mut() {
            t.push(next.clone());
        }
        cur = next;
    }
    Ok(SearchResult {
        s0: s0.clone(),
        tau,
        censored,
        trace,
    })
}

/// `n` samples `s0_i = sbar(r0) i/(n-1)`, evaluated in parallel. Samples at
/// `n = 100` are a subset of those at `n = 10000` (`9999 = 99 * 101`).
pub fn grid_search<C: ScalarContext>(
    ctx: &C,
    r0: &C::Scalar,
    n: usize,
    cap: usize,
) -> Result<Vec<SearchResult<C::Scalar>>> {
    if n < 2 {
        return Err(Error::OutOfRange {
            what: "grid size",
            value: n.to_string(),
        });
    }
    let top = sbar(ctx, r0)?;
    let den = ctx.from_i64(n as i64 - 1);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let ctx = ctx.clone();
            let s0 = top.clone() * ctx.from_i64(i as i64) / &den;
            stable_phase_length(&ctx, r0, &s0, cap, false)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BisectionResult<S> {
    /// Probe with the largest `tau`, with its trace.
    pub best: SearchResult<S>,
    pub lo: S,
    pub hi: S,
    pub iterations: usize,
    /// The bracket stopped shrinking before `iters` steps: the plateau is an
    /// artefact of the mantissa width, not of the dynamics.
    pub precision_limited: bool,
    /// Every evaluated `(s0, tau)` in order.
    pub probes: Vec<(S, usize)>,
}

/// Parity-guided bisection: keep `[l, m]` when `tau(m)` and `tau(u)` have the
/// same parity, otherwise `[m, u]`. A censored `tau` has unknown parity; the
/// half whose own midpoint scores higher is kept instead. No optimality
/// guarantee.
pub fn bisection_search<C: ScalarContext>(
    ctx: &C,
    r0: &C::Scalar,
    lo: &C::Scalar,
    hi: &C::Scalar,
    iters: usize,
    cap: usize,
) -> Result<BisectionResult<C::Scalar>> {
    if lo >= hi {
        return Err(Error::OutOfRange {
            what: "bisection bracket",
            value: format!("[{}, {}]", ctx.to_decimal(lo), ctx.to_decimal(hi)),
        });
    }
    let half = ctx.ratio(1, 2);
    let mut probes = Vec::new();
    let mut eval = |s: &C::Scalar| -> Result<SearchResult<C::Scalar>> {
        let res = stable_phase_length(ctx, r0, s, cap, false)?;
        probes.push((s.clone(), res.tau));
        Ok(res)
    };
    let mut best = eval(lo)?;
    let mut tau_u = eval(hi)?;
    if tau_u.tau > best.tau {
        best = tau_u.clone();
    }
    let (mut l, mut u) = (lo.clone(), hi.clone());
    let mut iterations = 0;
    let mut precision_limited = false;
    for _ in 0..iters {
        let m = (l.clone() + &u) * &half;
        if m == l || m == u {
            precision_limited = true;
            break;
        }
        iterations += 1;
        let tau_m = eval(&m)?;
        if tau_m.tau > best.tau {
            best = tau_m.clone();
        }
        let keep_left = if tau_m.censored || tau_u.censored {
            let left = eval(&((l.clone() + &m) * &half))?;
            let right = eval(&((m.clone() + &u) * &half))?;
            for side in [&left, &right] {
                if side.tau > best.tau {
                    best = side.clone();
                }
            }
            left.tau >= right.tau
        } else {
            tau_m.tau % 2 == tau_u.tau % 2
        };
        if keep_left {
            u = m;
            tau_u = tau_m;
        } else {
            l = m;
        }
    }
    let best = stable_phase_length(ctx, r0, &best.s0, cap, true)?;
    Ok(BisectionResult {
        best,
        lo: l,
        hi: u,
        iterations,
        precision_limited,
        probes,
    })
}

/// Empirical band checks on a stable trace. Findings are reported, not raised.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BandReport {
    /// Points with `r_t <= 1/10` (where the affine bound is checked).
    pub checked_affine: usize,
    /// Points where `g(r_t)` is defined.
    pub checked_threshold: usize,
    /// Indices with `s_t < 1 - 4/3 r_t - tol` and `r_t <= 1/10`.
    pub below_affine: Vec<usize>,
    /// Indices with `s_t > g(r_t) + tol`.
    pub above_threshold: Vec<usize>,
    /// Indices `t < tau` with `s_t <= 1/(1+r_t)^2` yet `s_{t+1} < 1/2`.
    pub jumps_in_stable_phase: Vec<usize>,
}

impl BandReport {
    pub fn clean(&self) -> bool {
        self.below_affine.is_empty() && self.above_threshold.is_empty() && self.jumps_in_stable_phase.is_empty()
    }
}

/// Evaluated in double precision; the bounds are empirical and `tol`-sized.
pub fn check_stable_band<S: Scalar>(trace: &[RSState<S>], tol: f64) -> BandReport {
    let hw = HardwareContext;
    let mut rep = BandReport::default();
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .map(|st| (st.r.to_f64_lossy(), st.s.to_f64_lossy()))
        .collect();
    for (t, &(r, s)) in pts.iter().enumerate() {
        if r <= 0.1 {
            rep.checked_affine += 1;
            if s < 1.0 - 4.0 / 3.0 * r - tol {
                rep.below_affine.push(t);
            }
        }
        if let Ok(g) = threshold_g(&hw, &r) {
            rep.checked_threshold += 1;
            if s > g + tol {
                rep.above_threshold.push(t);
            }
        }
        if let Some(&(_, s_next)) = pts.get(t + 1) {
            if s <= 1.0 / (1.0 + r).powi(2) && s_next < 0.5 {
                rep.jumps_in_stable_phase.push(t);
            }
        }
    }
    rep
}

/// True iff `(r0, s0)` may start a search.
pub fn valid_start<C: ScalarContext>(ctx: &C, r0: &C::Scalar, s0: &C::Scalar) -> bool {
    in_m(ctx, r0, s0)
}
