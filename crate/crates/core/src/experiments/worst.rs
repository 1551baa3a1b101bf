//! Worst-case construction, replay, certificate and the ambient re-run of
//! the constructed start.

use std::time::Instant;

use serde_json::json;

use super::{file_name, rs_table, scalar_or, Output, Summary, Table};
use crate::error::Result;
use crate::fwcore::{run_fw, BallInstance, Instance, RunOptions, StepRule, Trajectory};
use crate::numeric::{Scalar, ScalarContext};
use crate::worstcase::{
    certify, embed_start, perturbed_replay, roundtrip_error, run_worstcase, CertifyOptions, ConstructionParams,
    WorstCaseRun,
};

/// Stepsize factor used by the perturbation experiment.
pub const PERTURBATION: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct WorstCaseConfig {
    pub horizon: u64,
    pub epsilon: Option<String>,
    pub r_max: Option<String>,
    /// Replay with every line-search stepsize scaled by `1 + 1e-6`.
    pub perturb: bool,
}

/// Construction and certificate, with the perturbed replay substituted when requested.
pub fn build_run<C: ScalarContext>(ctx: &C, cfg: &WorstCaseConfig) -> Result<WorstCaseRun<C::Scalar>> {
    let mut params = ConstructionParams::new(ctx, cfg.horizon);
    params.epsilon = cfg
        .epsilon
        .as_deref()
        .map(|e| super::parse_scalar(ctx, e))
        .transpose()?;
    params.r_max = scalar_or(ctx, cfg.r_max.as_deref(), params.r_max)?;
    params.validate(ctx)?;
    let mut run = run_worstcase(ctx, &params)?;
    if cfg.perturb {
        let scale = ctx.one() + ctx.from_f64(PERTURBATION);
        let replay = perturbed_replay(ctx, run.construction.start(), cfg.horizon as usize, &scale)?;
        let opts = CertifyOptions {
            check_r0_floor: run.certificate.r0_floor_checked,
        };
        let mut cert = certify(ctx, &replay, cfg.horizon as usize, opts);
        cert.t_hat = Some(run.construction.t_hat);
        cert.roundtrip_max_err = Some(roundtrip_error(ctx, &run.construction, &replay));
        run.replay = replay;
        run.replay_exit = None;
        run.certificate = cert;
    }
    Ok(run)
}

/// Exact line search on the 2-D model from the embedded start, recording iterates.
pub fn ambient_rerun<C: ScalarContext>(
    ctx: &C,
    run: &WorstCaseRun<C::Scalar>,
    horizon: usize,
) -> Result<Trajectory<C::Scalar>> {
    let inst = Instance::Ball(BallInstance::model(ctx, vec![ctx.zero(), ctx.one()])?);
    let x0 = embed_start(ctx, run.construction.start())?;
    run_fw(
        ctx,
        &inst,
        &x0,
        &StepRule::ExactLineSearch,
        &RunOptions::horizon(horizon).with_points(),
    )
}

/// Largest `|r_t^ambient - r_t^replay|` over the common prefix.
pub fn ambient_deviation<C: ScalarContext>(
    ctx: &C,
    run: &WorstCaseRun<C::Scalar>,
    ambient: &Trajectory<C::Scalar>,
) -> C::Scalar {
    ambient
        .records
        .iter()
        .zip(&run.replay)
        .fold(ctx.zero(), |acc, (a, b)| acc.max_of((a.r.clone() - &b.r).abs()))
}

fn ambient_tables<C: ScalarContext>(ctx: &C, traj: &Trajectory<C::Scalar>) -> (Table, Table) {
    let mut polar = Table::new(&["t", "r", "theta", "gap"]);
    let mut plane = Table::new(&["t", "x", "y"]);
    for rec in &traj.records {
        let theta = rec.theta.as_ref().map(|v| ctx.to_decimal(v)).unwrap_or_default();
        polar.push(vec![
            rec.t.to_string(),
            ctx.to_decimal(&rec.r),
            theta,
            ctx.to_decimal(&rec.gap),
        ]);
        if let Some(x) = &rec.x {
            plane.push(vec![rec.t.to_string(), ctx.to_decimal(&x[0]), ctx.to_decimal(&x[1])]);
        }
    }
    (polar, plane)
}

/// Writes `replay`, `backward`, `ambient`, `semicircle` tables and
/// `certificate.json`. Fails (without error) when the certificate fails.
pub fn cmd_worstcase<C: ScalarContext>(ctx: &C, cfg: &WorstCaseConfig, out: &Output) -> Result<Summary> {
    let clock = Instant::now();
    let run = build_run(ctx, cfg)?;
    let horizon = cfg.horizon as usize;
    let ambient = ambient_rerun(ctx, &run, horizon)?;
    let deviation = ambient_deviation(ctx, &run, &ambient);
    let wall = clock.elapsed().as_secs_f64();

    let mut files = vec![
        file_name(&out.table("replay", &rs_table(ctx, &run.replay))?),
        file_name(&out.table("backward", &rs_table(ctx, &run.construction.backward))?),
    ];
    let (polar, plane) = ambient_tables(ctx, &ambient);
    files.push(file_name(&out.table("ambient", &polar)?));
    files.push(file_name(&out.table("semicircle", &plane)?));

    let cert = &run.certificate;
    let overshoot = run
        .construction
        .overshoot()
        .map(|o| json!({"r": ctx.to_decimal(&o.r), "s": ctx.to_decimal(&o.s)}));
    let params = json!({
        "horizon": cfg.horizon,
        "epsilon": ctx.to_decimal(&run.construction.epsilon),
        "r_max": cfg.r_max.clone().unwrap_or_else(|| "1/10".into()),
        "perturbed": cfg.perturb,
    });
    let doc = json!({
        "certificate": cert.to_json(ctx),
        "params": params,
        "precision": ctx.config(),
        "effective_bits": ctx.mantissa_bits(),
        "overshoot": overshoot,
        "replay_exit": run.replay_exit.as_ref().map(|(t, why)| json!({"step": t, "reason": why})),
        "ambient_max_r_deviation": ctx.to_decimal(&deviation),
        "wall_time_seconds": wall,
    });
    files.push(file_name(&out.json("certificate", &doc)?));

    Ok(Summary {
        command: "worstcase",
        passed: cert.passes(),
        details: json!({
            "passes": cert.passes(),
            "T_hat": run.construction.t_hat,
            "r0": cert.r0.to_f64_lossy(),
            "s0": cert.s0.to_f64_lossy(),
            "first_decrease": cert.first_decrease,
            "first_residual_violation": cert.first_residual_violation,
            "first_c_violation": cert.first_c_violation,
            "slope_estimate": cert.slope_estimate.is_finite().then_some(cert.slope_estimate),
            "ambient_max_r_deviation": deviation.to_f64_lossy(),
            "precision": ctx.config(),
        }),
        files,
    })
}
