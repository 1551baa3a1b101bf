//! Iterations to reach a gap target from every point of a grid over the disk.

use rayon::prelude::*;
use serde_json::json;

use super::{file_name, Output, Summary, Table};
use crate::error::Result;
use crate::fwcore::{run_fw, BallInstance, Instance, RunOptions, StepRule};
use crate::numeric::ScalarContext;

#[derive(Debug, Clone)]
pub struct HeatmapConfig {
    /// Grid points per axis over `[-1, 1]`.
    pub n: usize,
    pub target_gap: f64,
    /// Iteration cap per start; a start that hits it is reported with `iters = cap`.
    pub cap: usize,
    /// Bound checked on every start.
    pub bound: usize,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            n: 201,
            target_gap: 1e-4,
            cap: 1000,
            bound: 100,
        }
    }
}

/// First `t` with `gap_t <= target` from `x0`, or `None` at the cap.
pub fn iterations_to_gap<C: ScalarContext>(
    ctx: &C,
    inst: &Instance<C::Scalar>,
    x0: &[C::Scalar],
    target: &C::Scalar,
    cap: usize,
) -> Result<Option<usize>> {
    let opts = RunOptions::horizon(cap).with_stop_gap(target.clone());
    let traj = run_fw(ctx, inst, x0, &StepRule::ExactLineSearch, &opts)?;
    Ok(traj.records.iter().find(|r| r.gap <= *target).map(|r| r.t))
}

/// Rows `x,y,iters` in row-major order (`x` outer); points outside the disk are skipped.
pub fn heatmap_table<C: ScalarContext>(ctx: &C, cfg: &HeatmapConfig) -> Result<Table> {
    let inst = Instance::Ball(BallInstance::model(ctx, vec![ctx.zero(), ctx.one()])?);
    let target = ctx.from_f64(cfg.target_gap);
    let n = cfg.n.max(2);
    let den = ctx.from_i64(n as i64 - 1);
    let coord = |i: usize| ctx.from_i64(2 * i as i64) / &den - ctx.one();
    let rows: Vec<Vec<Vec<String>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = coord(i);
            let mut col = Vec::new();
            for j in 0..n {
                let y = coord(j);
                if x.clone() * &x + y.clone() * &y > ctx.one() {
                    continue;
                }
                let iters = iterations_to_gap(ctx, &inst, &[x.clone(), y.clone()], &target, cfg.cap)?;
                let iters = iters.unwrap_or(cfg.cap);
                col.push(vec![ctx.to_decimal(&x), ctx.to_decimal(&y), iters.to_string()]);
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["x", "y", "iters"]);
    rows.into_iter().flatten().for_each(|r| table.push(r));
    Ok(table)
}

pub fn cmd_heatmap<C: ScalarContext>(ctx: &C, cfg: &HeatmapConfig, out: &Output) -> Result<Summary> {
    let table = heatmap_table(ctx, cfg)?;
    let iters: Vec<usize> = table
        .rows
        .iter()
        .map(|r| r[2].parse().expect("integer column"))
        .collect();
    let max_iters = iters.iter().copied().max().unwrap_or(0);
    let path = out.table("heatmap", &table)?;
    Ok(Summary {
        command: "heatmap",
        passed: max_iters <= cfg.bound,
        details: json!({
            "n": cfg.n,
            "points": iters.len(),
            "target_gap": cfg.target_gap,
            "max_iters": max_iters,
            "bound": cfg.bound,
            "precision": ctx.config(),
        }),
        files: vec![file_name(&path)],
    })
}
