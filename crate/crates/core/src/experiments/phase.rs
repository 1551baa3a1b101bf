//! Phase-plane export: a trace of `(r_t, s_t)` and the overlay curves.

use std::fs::File;
use std::path::PathBuf;

use serde_json::json;

use super::searches::{run_bisection, BisectConfig};
use super::worst::{build_run, WorstCaseConfig};
use super::{file_name, parse_scalar, rs_table, Output, Summary, Table};
use crate::dynamics::{sample_curves, RSState};
use crate::error::{Error, Result};
use crate::numeric::ScalarContext;
use crate::search::{check_stable_band, stable_phase_length};

/// Tolerance on the band `1 - 4r/3 <= s <= g(r)` for constructed traces.
pub const PHASE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub enum TraceSource {
    WorstCase(WorstCaseConfig),
    Bisect(BisectConfig),
    /// The stable phase from a given `(r_0, s_0)`.
    Stable {
        r0: String,
        s0: String,
        cap: usize,
    },
    /// A `t,r,s` CSV, such as a `replay.csv` written earlier.
    File(PathBuf),
    Empty,
}

#[derive(Debug, Clone)]
pub struct PhaseConfig {
    pub source: TraceSource,
    /// Samples per curve.
    pub curve_n: usize,
    /// Curves are sampled on `(0, r_max]`.
    pub r_max: String,
    pub tol: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            source: TraceSource::Empty,
            curve_n: 200,
            r_max: "1/10".into(),
            tol: PHASE_TOL,
        }
    }
}

/// Reads `r` and `s` columns by header name.
pub fn read_trace<C: ScalarContext>(ctx: &C, path: &PathBuf) -> Result<Vec<RSState<C::Scalar>>> {
    let mut rdr = csv::Reader::from_reader(File::open(path)?);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column {name}", path.display())))
    };
    let (ri, si) = (col("r")?, col("s")?);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(RSState::new(parse_scalar(ctx, &rec[ri])?, parse_scalar(ctx, &rec[si])?))
        })
        .collect()
}

pub fn curves_table<C: ScalarContext>(ctx: &C, n: usize, r_max: &C::Scalar) -> Table {
    let mut t = Table::new(&["curve", "r", "s"]);
    for (curve, r, s) in sample_curves(ctx, n, r_max) {
        t.push(vec![curve.name().to_owned(), ctx.to_decimal(&r), ctx.to_decimal(&s)]);
    }
    t
}

/// Writes `phase_trace` (`t,r,s`) and `phase_curves` (`curve,r,s`). Only a
/// constructed trace is held to the band; other sources report it.
pub fn cmd_phase<C: ScalarContext>(ctx: &C, cfg: &PhaseConfig, out: &Output) -> Result<Summary> {
    let (label, trace) = match &cfg.source {
        TraceSource::WorstCase(w) => ("worstcase", build_run(ctx, w)?.replay),
        TraceSource::Bisect(b) => ("bisect", run_bisection(ctx, b)?.best.trace.unwrap_or_default()),
        TraceSource::Stable { r0, s0, cap } => {
            let (r0, s0) = (parse_scalar(ctx, r0)?, parse_scalar(ctx, s0)?);
            (
                "stable",
                stable_phase_length(ctx, &r0, &s0, *cap, true)?
                    .trace
                    .unwrap_or_default(),
            )
        }
        TraceSource::File(p) => ("file", read_trace(ctx, p)?),
        TraceSource::Empty => ("empty", Vec::new()),
    };
    let band = check_stable_band(&trace, cfg.tol);
    let r_max = parse_scalar(ctx, &cfg.r_max)?;
    let files = vec![
        file_name(&out.table("phase_trace", &rs_table(ctx, &trace))?),
        file_name(&out.table("phase_curves", &curves_table(ctx, cfg.curve_n, &r_max))?),
    ];
    let held = matches!(cfg.source, TraceSource::WorstCase(_));
    Ok(Summary {
        command: "phase",
        passed: !held || band.clean(),
        details: json!({
            "source": label,
            "points": trace.len(),
            "band_enforced": held,
            "band": band,
            "tol": cfg.tol,
            "precision": ctx.config(),
        }),
        files,
    })
}
