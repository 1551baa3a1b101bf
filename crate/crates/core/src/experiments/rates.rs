//! Convergence-rate sweeps: exact line search from seeded random starts for
//! a target on the sphere, inside the ball and outside it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::{file_name, sample_unit_ball, Output, Summary, Table};
use crate::error::Result;
use crate::fwcore::export::RunDescriptor;
use crate::fwcore::{run_fw, BallInstance, Instance, RunOptions, StepRule, Trajectory};
use crate::numeric::{Scalar, ScalarContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Target `p` on the unit sphere.
    Boundary,
    /// Target `p/2`: the minimiser is interior.
    Interior,
    /// Target `2p`: the minimiser `p` is on the boundary, the gradient there is not zero.
    Exterior,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Boundary, Regime::Interior, Regime::Exterior];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Boundary => "boundary",
            Regime::Interior => "interior",
            Regime::Exterior => "exterior",
        }
    }

    fn scale(self) -> (i64, i64) {
        match self {
            Regime::Boundary => (1, 1),
            Regime::Interior => (1, 2),
            Regime::Exterior => (2, 1),
        }
    }

    /// Ball instance in `R^2` with direction `p = (0, 1)`.
    pub fn instance<C: ScalarContext>(self, ctx: &C) -> Result<Instance<C::Scalar>> {
        let (num, den) = self.scale();
        let target = vec![ctx.zero(), ctx.ratio(num, den)];
        Ok(Instance::Ball(BallInstance::new(
            ctx,
            target,
            ctx.one(),
            ctx.from_i64(2),
        )?))
    }
}

#[derive(Debug, Clone)]
pub struct RatesConfig {
    pub horizon: usize,
    /// Random starts per regime.
    pub starts: usize,
    pub seed: u64,
    /// Replaces the three regimes by a single user instance.
    pub descriptor: Option<RunDescriptor>,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            horizon: 1000,
            starts: 3,
            seed: 0,
            descriptor: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub regime: Option<Regime>,
    pub steps: usize,
    pub final_gap: f64,
    /// Boundary regime: `gap_t <= 1/(t + 1/r_0)^2` up to `2^-40` relative.
    pub upper_bound_ok: Option<bool>,
    /// Interior regime: `gap_{t+20} / gap_t <= 0.9` for `t >= 10` above roundoff.
    pub linear_rate_ok: Option<bool>,
    /// Pairs the linear-rate check actually compared; short runs compare none.
    pub linear_rate_pairs: Option<usize>,
}

/// `gap_t <= (1 + 2^-40) / (t + 1/r_0)^2` for every record.
pub fn upper_bound_holds<C: ScalarContext>(ctx: &C, traj: &Trajectory<C::Scalar>) -> bool {
    let Some(first) = traj.records.first() else {
        return true;
    };
    if first.r.is_zero() {
        return true;
    }
    let inv_r0 = ctx.one() / &first.r;
    let slack = ctx.one() + ctx.pow2(-40);
    traj.records.iter().all(|rec| {
        let bound = slack.clone() / (ctx.from_i64(rec.t as i64) + &inv_r0).square();
        rec.gap <= bound
    })
}

/// Checks `gap_{t+20} <= 0.9 gap_t` for `t >= 10`, skipping pairs whose later
/// gap is within `2^20` ulps squared of zero, where only roundoff is left.
/// Returns whether every pair holds and how many pairs were checked.
pub fn linear_rate_holds<C: ScalarContext>(ctx: &C, traj: &Trajectory<C::Scalar>) -> (bool, usize) {
    let floor = (ctx.epsilon() * ctx.pow2(20)).square();
    let ratio = ctx.ratio(9, 10);
    let gaps: Vec<&C::Scalar> = traj.records.iter().map(|r| &r.gap).collect();
    let mut checked = 0;
    let ok = (10..gaps.len().saturating_sub(20)).all(|t| {
        let later = gaps[t + 20];
        if *later <= floor {
            return true;
        }
        checked += 1;
        *later <= ratio.clone() * gaps[t]
    });
    (ok, checked)
}

fn gap_table<C: ScalarContext>(ctx: &C, traj: &Trajectory<C::Scalar>) -> Table {
    let mut t = Table::new(&["t", "gap"]);
    for rec in &traj.records {
        t.push(vec![rec.t.to_string(), ctx.to_decimal(&rec.gap)]);
    }
    t
}

/// Random feasible start: the unit ball, or its image under `A^{-1/2}`.
fn random_start<C: ScalarContext>(ctx: &C, inst: &Instance<C::Scalar>, rng: &mut ChaCha8Rng) -> Vec<C::Scalar> {
    let u: Vec<C::Scalar> = sample_unit_ball(rng, inst.dimension())
        .into_iter()
        .map(|v| ctx.from_f64(v))
        .collect();
    match inst {
        Instance::Ball(_) => u,
        Instance::Ellipsoid(e) => e.inv_sqrt_shape().mul_vec(ctx, &u),
    }
}

/// Label, regime (absent for a custom instance), instance and step rule.
type Job<S> = (String, Option<Regime>, Instance<S>, StepRule<S>);

/// One `t,gap` table per run, named `rates_<regime>_<k>` (or `rates_custom_<k>`).
pub fn cmd_rates<C: ScalarContext>(ctx: &C, cfg: &RatesConfig, out: &Output) -> Result<Summary> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = RunOptions::horizon(cfg.horizon);
    let mut runs = Vec::new();
    let mut files = Vec::new();

    let jobs: Vec<Job<C::Scalar>> = match &cfg.descriptor {
        Some(desc) => vec![("custom".into(), None, desc.instance.build(ctx)?, desc.rule.build(ctx)?)],
        None => Regime::ALL
            .iter()
            .map(|&g| {
                Ok((
                    g.name().to_owned(),
                    Some(g),
                    g.instance(ctx)?,
                    StepRule::ExactLineSearch,
                ))
            })
            .collect::<Result<_>>()?,
    };

    for (label, regime, inst, rule) in &jobs {
        for k in 0..cfg.starts {
            let x0 = random_start(ctx, inst, &mut rng);
            let traj = run_fw(ctx, inst, &x0, rule, &opts)?;
            let name = format!("rates_{label}_{k}");
            files.push(file_name(&out.table(&name, &gap_table(ctx, &traj))?));
            let rate = (*regime == Some(Regime::Interior)).then(|| linear_rate_holds(ctx, &traj));
            runs.push(RunReport {
                name,
                regime: *regime,
                steps: traj.len() - 1,
                final_gap: traj.last().map_or(0.0, |r| r.gap.to_f64_lossy()),
                upper_bound_ok: (*regime == Some(Regime::Boundary)).then(|| upper_bound_holds(ctx, &traj)),
                linear_rate_ok: rate.map(|r| r.0),
                linear_rate_pairs: rate.map(|r| r.1),
            });
        }
    }

    let passed = runs
        .iter()
        .all(|r| r.upper_bound_ok != Some(false) && r.linear_rate_ok != Some(false));
    Ok(Summary {
        command: "run",
        passed,
        details: json!({
            "horizon": cfg.horizon,
            "seed": cfg.seed,
            "precision": ctx.config(),
            "runs": runs,
        }),
        files,
    })
}
