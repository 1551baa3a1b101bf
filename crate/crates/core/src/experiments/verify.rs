//! Invariant suites behind the `verify` command, with a machine-readable report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::rates::{linear_rate_holds, upper_bound_holds, Regime};
use super::searches::{run_bisection, BisectConfig, BAND_TOL};
use super::{file_name, sample_unit_ball, Output, Summary};
use crate::dynamics::{backward, check_jump_precondition, forward, monotone_condition, sbar, Domain, RSState};
use crate::error::Result;
use crate::fwcore::linalg::SymMatrix;
use crate::fwcore::{run_fw, verify_affine_equivalence, EllipsoidInstance, RunOptions, StepRule};
use crate::numeric::{ExtendedContext, HardwareContext, Scalar, ScalarContext};
use crate::search::{check_stable_band, grid_search, stable_phase_length};
use crate::worstcase::{
    certify, default_bits, forward_orbit, lemma_grid, perturbed_replay, run_worstcase, CertifyOptions,
    ConstructionParams,
};

/// Horizon of the construction exercised by the worstcase suite.
pub const VERIFY_HORIZON: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Numeric,
    Fwcore,
    Dynamics,
    Worstcase,
    Search,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Numeric,
        Suite::Fwcore,
        Suite::Dynamics,
        Suite::Worstcase,
        Suite::Search,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Numeric => "numeric",
            Suite::Fwcore => "fwcore",
            Suite::Dynamics => "dynamics",
            Suite::Worstcase => "worstcase",
            Suite::Search => "search",
        }
    }

    pub fn parse(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Required,
    /// Heuristic outcome: a failure is a warning and leaves the exit status alone.
    Advisory,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub severity: Severity,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyConfig {
    /// Empty means every suite.
    pub suites: Vec<Suite>,
    /// Scale worst-case stepsizes by `1 + 1e-6`; the certificate is expected to break.
    pub perturb: bool,
    pub seed: u64,
}

struct Checks {
    suite: Suite,
    out: Vec<CheckResult>,
}

impl Checks {
    fn push(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.push_with(name, passed, Severity::Required, detail);
    }

    fn push_with(&mut self, name: &'static str, passed: bool, severity: Severity, detail: impl Into<String>) {
        self.out.push(CheckResult {
            suite: self.suite,
            name,
            passed,
            severity,
            detail: detail.into(),
        });
    }

    /// Records an error from a check body as a failure.
    fn guard(&mut self, name: &'static str, res: Result<()>) {
        if let Err(e) = res {
            self.push(name, false, format!("error: {e}"));
        }
    }
}

/// Relative round-trip tolerance: `2^-40` at 53 bits, `2^-(bits-56)` beyond.
pub fn roundtrip_tol<C: ScalarContext>(ctx: &C) -> C::Scalar {
    let k = (ctx.mantissa_bits() as i32 - 56).max(40);
    ctx.pow2(-k)
}

fn rel_err<C: ScalarContext>(ctx: &C, got: &C::Scalar, want: &C::Scalar) -> C::Scalar {
    let scale = want.abs().max_of(ctx.pow2(-1000));
    (got.clone() - want).abs() / scale
}

/// Uniform-ish point of `M`: `r` in `(0, 2]`, `s` in `[0, sbar(r)]`.
pub fn random_m_state<C: ScalarContext, R: Rng>(ctx: &C, rng: &mut R) -> Result<RSState<C::Scalar>> {
    let r = ctx.from_f64(rng.gen_range(1e-3..=2.0));
    let s = sbar(ctx, &r)? * ctx.from_f64(rng.gen_range(0.0..=1.0));
    RSState::in_m(ctx, r, s)
}

fn numeric_suite<C: ScalarContext>(ctx: &C, rng: &mut ChaCha8Rng, c: &mut Checks) {
    let mut bad = 0;
    for _ in 0..200 {
        let x = ctx.from_f64(rng.gen_range(-1.0..1.0)) * ctx.pow2(rng.gen_range(-60..60)) / ctx.from_i64(3);
        match ctx.parse(&ctx.to_decimal(&x)) {
            Ok(y) if y == x => {}
            _ => bad += 1,
        }
    }
    c.push("decimal_roundtrip", bad == 0, format!("{bad} of 200 values changed"));
    let ordered = ctx.epsilon() < ctx.slack() && ctx.slack() < ctx.one();
    c.push("tolerance_ordering", ordered, "epsilon < slack < 1");
}

fn fwcore_suite<C: ScalarContext>(ctx: &C, rng: &mut ChaCha8Rng, c: &mut Checks) {
    let res = (|| -> Result<()> {
        let inst = Regime::Boundary.instance(ctx)?;
        let r0 = ctx.from_i64(2).sqrt();
        let rule = StepRule::Schedule(vec![r0.clone() / (ctx.one() + &r0), ctx.one()]);
        let tr = run_fw(ctx, &inst, &[ctx.one(), ctx.zero()], &rule, &RunOptions::horizon(2))?;
        let gap = tr.last().expect("records").gap.clone();
        c.push(
            "two_step_termination",
            gap <= ctx.pow2(-40),
            format!("gap_2 = {:e}", gap.to_f64_lossy()),
        );

        let mut worst = 0usize;
        let mut ok = true;
        for _ in 0..20 {
            let x0: Vec<C::Scalar> = sample_unit_ball(rng, 2).into_iter().map(|v| ctx.from_f64(v)).collect();
            let tr = run_fw(ctx, &inst, &x0, &StepRule::ExactLineSearch, &RunOptions::horizon(200))?;
            ok &= upper_bound_holds(ctx, &tr);
            worst = worst.max(tr.len());
        }
        c.push("upper_bound", ok, format!("20 seeded starts, up to {worst} records"));

        let tr = run_fw(
            ctx,
            &inst,
            &[ctx.zero(), ctx.ratio(-1, 2)],
            &StepRule::ExactLineSearch,
            &RunOptions::horizon(5),
        )?;
        c.push("collinear_start", tr.len() <= 2, format!("{} records", tr.len()));

        let interior = Regime::Interior.instance(ctx)?;
        let tr = run_fw(
            ctx,
            &interior,
            &[ctx.ratio(3, 5), ctx.ratio(-1, 2)],
            &StepRule::ExactLineSearch,
            &RunOptions::horizon(300),
        )?;
        let (ok, pairs) = linear_rate_holds(ctx, &tr);
        c.push(
            "interior_linear_rate",
            ok,
            format!("gap_(t+20) <= 0.9 gap_t for t >= 10 on {pairs} pairs above roundoff"),
        );

        let shape = SymMatrix::diagonal(ctx, vec![ctx.from_i64(4), ctx.one()]);
        let e = EllipsoidInstance::new(ctx, shape, ctx.one(), vec![ctx.zero(), -ctx.one()])?;
        let rep = verify_affine_equivalence(ctx, &e, &[ctx.ratio(1, 2), ctx.zero()], 50)?;
        c.push(
            "affine_equivalence",
            rep.max_gap_deviation <= 1e-8 && rep.steps == 51,
            format!("{} steps, max gap deviation {:e}", rep.steps, rep.max_gap_deviation),
        );
        Ok(())
    })();
    c.guard("fwcore", res);
}

fn dynamics_suite<C: ScalarContext>(ctx: &C, rng: &mut ChaCha8Rng, c: &mut Checks) {
    let res = (|| -> Result<()> {
        let tol = roundtrip_tol(ctx);
        let g = backward(ctx, &RSState::in_mtilde(ctx, ctx.ratio(1, 3), ctx.ratio(3, 4))?)?;
        let f = forward(ctx, &RSState::in_m(ctx, ctx.ratio(4, 5), ctx.ratio(5, 12))?)?;
        let err = [
            rel_err(ctx, &g.r, &ctx.ratio(4, 5)),
            rel_err(ctx, &g.s, &ctx.ratio(5, 12)),
            rel_err(ctx, &f.r, &ctx.ratio(1, 3)),
            rel_err(ctx, &f.s, &ctx.ratio(3, 4)),
        ]
        .into_iter()
        .fold(ctx.zero(), Scalar::max_of);
        c.push(
            "rational_roundtrip",
            err <= tol,
            format!("max relative error {:e}", err.to_f64_lossy()),
        );

        let (mut escapes, mut jumps, mut bad_jumps) = (0, 0, 0);
        for _ in 0..200 {
            let st = random_m_state(ctx, rng)?;
            let orbit = forward_orbit(ctx, &st, 200);
            for w in orbit.states.windows(2) {
                if w[1].domain == Domain::Unchecked && !w[1].r.is_zero() {
                    escapes += 1;
                }
                if w[1].s < ctx.ratio(1, 2) {
                    jumps += 1;
                    if !check_jump_precondition(ctx, &w[0].r, &w[0].s, &w[1].s) {
                        bad_jumps += 1;
                    }
                }
            }
        }
        c.push("forward_stays_in_m", escapes == 0, format!("{escapes} escapes"));
        c.push(
            "jump_characterization",
            bad_jumps == 0,
            format!("{bad_jumps} of {jumps} jumps without s > 1/(1+r)^2"),
        );

        let (mut checked, mut disagree) = (0, 0);
        let margin = ctx.slack();
        for _ in 0..500 {
            let r = ctx.from_f64(rng.gen_range(1e-3..=1.0 / 3.0));
            let s = ctx.one() / (ctx.one() + &r) * ctx.from_f64(rng.gen_range(0.0..=1.0));
            let st = RSState::in_mtilde(ctx, r, s)?;
            let prev = backward(ctx, &st)?;
            if (st.s.clone() - &prev.s).abs() <= margin {
                continue;
            }
            checked += 1;
            if monotone_condition(ctx, &st) != (prev.s <= st.s) {
                disagree += 1;
            }
        }
        c.push(
            "monotone_condition_agreement",
            disagree == 0,
            format!("{disagree} disagreements over {checked} points"),
        );
        Ok(())
    })();
    c.guard("dynamics", res);
}

fn worstcase_suite<C: ScalarContext>(ctx: &C, perturb: bool, c: &mut Checks) {
    let res = (|| -> Result<()> {
        let horizon = VERIFY_HORIZON;
        let bits = default_bits(horizon).max(ctx.mantissa_bits());
        let ext = ExtendedContext::new(bits)?;
        let params = ConstructionParams::new(&ext, horizon);
        let run = run_worstcase(&ext, &params)?;
        let cert = &run.certificate;
        c.push(
            "certificate",
            cert.passes() && run.construction.t_hat >= horizon as usize,
            format!(
                "T = {horizon} at {bits} bits: T_hat = {}, slope {:.4}",
                run.construction.t_hat, cert.slope_estimate
            ),
        );
        let err = cert.roundtrip_max_err.clone().unwrap_or_else(|| ext.zero());
        c.push(
            "reversibility",
            err <= ext.slack(),
            format!("max |F^t(start) - G^(T_hat - t)(end)| = {:e}", err.to_f64_lossy()),
        );

        let hw = HardwareContext;
        let start = run.construction.start();
        let hw_start = RSState::new(start.r.to_f64_lossy(), start.s.to_f64_lossy());
        let orbit = forward_orbit(&hw, &hw_start, horizon as usize);
        let hw_cert = certify(&hw, &orbit.states, horizon as usize, CertifyOptions::default());
        c.push(
            "hardware_fragility",
            !hw_cert.monotone_s,
            format!("53-bit replay first decrease at {:?}", hw_cert.first_decrease),
        );

        if perturb {
            let scale = ext.one() + ext.from_f64(super::worst::PERTURBATION);
            let replay = perturbed_replay(&ext, start, horizon as usize, &scale)?;
            let pc = certify(&ext, &replay, horizon as usize, CertifyOptions::default());
            c.push(
                "perturbed_monotone_s",
                pc.monotone_s,
                format!(
                    "stepsizes scaled by 1 + 1e-6: first decrease at {:?}",
                    pc.first_decrease
                ),
            );
        }

        let grid = lemma_grid(ctx, 40, 16, 1e-9)?;
        c.push(
            "lemma_grid",
            grid.passes(),
            format!(
                "{} points: min X+Y {:.6}, c' in [{:.6}, {:.6}]",
                grid.points, grid.xy_min, grid.c_next_min, grid.c_next_max
            ),
        );
        Ok(())
    })();
    c.guard("worstcase", res);
}

fn search_suite<C: ScalarContext>(ctx: &C, c: &mut Checks) {
    let res = (|| -> Result<()> {
        let one = ctx.one();
        let tau = stable_phase_length(ctx, &one, &ctx.ratio(2, 5), 100, false)?.tau;
        c.push("phase_length_example", tau == 1, format!("tau(1, 0.4) = {tau}"));

        // 990 = 99 * 10, so the coarse grid is a subset of the fine one.
        let coarse = grid_search(ctx, &one, 100, 200)?
            .iter()
            .map(|r| r.tau)
            .max()
            .unwrap_or(0);
        let fine = grid_search(ctx, &one, 991, 200)?
            .iter()
            .map(|r| r.tau)
            .max()
            .unwrap_or(0);
        c.push(
            "nested_grid_max",
            fine >= coarse,
            format!("max tau {coarse} (n=100), {fine} (n=991)"),
        );

        let b = run_bisection(ctx, &BisectConfig::default())?;
        c.push_with(
            "bisection_tau",
            b.best.tau >= 50,
            Severity::Advisory,
            format!(
                "tau = {} after {} steps (precision limited: {})",
                b.best.tau, b.iterations, b.precision_limited
            ),
        );
        let band = check_stable_band(b.best.trace.as_deref().unwrap_or_default(), BAND_TOL);
        c.push_with(
            "bisection_band",
            band.clean(),
            Severity::Advisory,
            format!(
                "{} below affine, {} above g, {} jumps",
                band.below_affine.len(),
                band.above_threshold.len(),
                band.jumps_in_stable_phase.len()
            ),
        );
        Ok(())
    })();
    c.guard("search", res);
}

/// Runs the selected suites in the canonical order.
pub fn run_suites<C: ScalarContext>(ctx: &C, cfg: &VerifyConfig) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut all = Vec::new();
    for suite in Suite::ALL {
        if !cfg.suites.is_empty() && !cfg.suites.contains(&suite) {
            continue;
        }
        let mut c = Checks { suite, out: Vec::new() };
        match suite {
            Suite::Numeric => numeric_suite(ctx, &mut rng, &mut c),
            Suite::Fwcore => fwcore_suite(ctx, &mut rng, &mut c),
            Suite::Dynamics => dynamics_suite(ctx, &mut rng, &mut c),
            Suite::Worstcase => worstcase_suite(ctx, cfg.perturb, &mut c),
            Suite::Search => search_suite(ctx, &mut c),
        }
        all.extend(c.out);
    }
    all
}

/// Required checks decide the verdict; advisory failures are counted as warnings.
pub fn cmd_verify<C: ScalarContext>(ctx: &C, cfg: &VerifyConfig, out: &Output) -> Result<Summary> {
    let checks = run_suites(ctx, cfg);
    let passed = checks.iter().all(|c| c.passed || c.severity == Severity::Advisory);
    let warnings = checks
        .iter()
        .filter(|c| !c.passed && c.severity == Severity::Advisory)
        .count();
    let report = json!({
        "passed": passed,
        "warnings": warnings,
        "precision": ctx.config(),
        "perturbed": cfg.perturb,
        "checks": checks,
    });
    let path = out.json("verify", &report)?;
    Ok(Summary {
        command: "verify",
        passed,
        details: report,
        files: vec![file_name(&path)],
    })
}
