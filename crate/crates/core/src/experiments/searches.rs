//! Grid and bisection searches for long stable phases.

use serde_json::json;

use super::{file_name, parse_scalar, rs_table, scalar_or, Output, Summary, Table};
use crate::error::Result;
use crate::numeric::{Scalar, ScalarContext};
use crate::search::{bisection_search, check_stable_band, grid_search, BisectionResult, DEFAULT_CAP, DEFAULT_GRID_N};

/// Band tolerance for traces produced by searches.
pub const BAND_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub r0: Option<String>,
    pub n: usize,
    pub cap: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r0: None,
            n: DEFAULT_GRID_N,
            cap: DEFAULT_CAP,
        }
    }
}

/// Writes `gridsearch` with `s0,tau`.
pub fn cmd_gridsearch<C: ScalarContext>(ctx: &C, cfg: &GridConfig, out: &Output) -> Result<Summary> {
    let r0 = scalar_or(ctx, cfg.r0.as_deref(), ctx.one())?;
    let results = grid_search(ctx, &r0, cfg.n, cfg.cap)?;
    let mut table = Table::new(&["s0", "tau"]);
    for res in &results {
        table.push(vec![ctx.to_decimal(&res.s0), res.tau.to_string()]);
    }
    let best = results.iter().max_by_key(|r| r.tau).expect("n >= 2");
    let censored = results.iter().filter(|r| r.censored).count();
    let path = out.table("gridsearch", &table)?;
    Ok(Summary {
        command: "gridsearch",
        passed: true,
        details: json!({
            "r0": ctx.to_decimal(&r0),
            "n": cfg.n,
            "cap": cfg.cap,
            "max_tau": best.tau,
            "argmax_s0": ctx.to_decimal(&best.s0),
            "censored": censored,
            "precision": ctx.config(),
        }),
        files: vec![file_name(&path)],
    })
}

#[derive(Debug, Clone)]
pub struct BisectConfig {
    pub r0: Option<String>,
    pub lo: String,
    pub hi: String,
    pub iters: usize,
    pub cap: usize,
}

impl Default for BisectConfig {
    fn default() -> Self {
        Self {
            r0: None,
            lo: "0.4".into(),
            hi: "0.5".into(),
            iters: 60,
            cap: DEFAULT_CAP,
        }
    }
}

pub fn run_bisection<C: ScalarContext>(ctx: &C, cfg: &BisectConfig) -> Result<BisectionResult<C::Scalar>> {
    let r0 = scalar_or(ctx, cfg.r0.as_deref(), ctx.one())?;
    let lo = parse_scalar(ctx, &cfg.lo)?;
    let hi = parse_scalar(ctx, &cfg.hi)?;
    bisection_search(ctx, &r0, &lo, &hi, cfg.iters, cfg.cap)
}

/// Writes the best trace `bisect_trace` (`t,r,s`) and `bisect_probes` (`s0,tau`).
/// The search is heuristic, so a short phase is reported but does not fail.
pub fn cmd_bisect<C: ScalarContext>(ctx: &C, cfg: &BisectConfig, out: &Output) -> Result<Summary> {
    let res = run_bisection(ctx, cfg)?;
    let trace = res.best.trace.as_deref().unwrap_or_default();
    let band = check_stable_band(trace, BAND_TOL);
    let mut probes = Table::new(&["s0", "tau"]);
    for (s, tau) in &res.probes {
        probes.push(vec![ctx.to_decimal(s), tau.to_string()]);
    }
    let files = vec![
        file_name(&out.table("bisect_trace", &rs_table(ctx, trace))?),
        file_name(&out.table("bisect_probes", &probes)?),
    ];
    Ok(Summary {
        command: "bisect",
        passed: true,
        details: json!({
            "tau": res.best.tau,
            "s0": ctx.to_decimal(&res.best.s0),
            "censored": res.best.censored,
            "iterations": res.iterations,
            "precision_limited": res.precision_limited,
            "bracket": [ctx.to_decimal(&res.lo), ctx.to_decimal(&res.hi)],
            "band": band,
            "s0_f64": res.best.s0.to_f64_lossy(),
            "precision": ctx.config(),
        }),
        files,
    })
}
