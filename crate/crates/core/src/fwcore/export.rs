//! Trajectory CSV and instance JSON descriptors.
//!
//! Scalars are written as decimal strings at full context precision.

use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize};

use super::instance::{BallInstance, EllipsoidInstance, Instance};
use super::linalg::SymMatrix;
use super::solver::{StepRule, Trajectory};
use crate::error::{Error, Result};
use crate::numeric::{PrecisionConfig, ScalarContext};

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "r", "theta", "s", "gamma", "gap"];

/// Writes `t,r,theta,s,gamma,gap`; undefined fields are left empty.
pub fn write_trajectory_csv<C: ScalarContext, W: Write>(ctx: &C, traj: &Trajectory<C::Scalar>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    let opt = |v: &Option<C::Scalar>| v.as_ref().map(|x| ctx.to_decimal(x)).unwrap_or_default();
    for rec in &traj.records {
        w.write_record([
            rec.t.to_string(),
            ctx.to_decimal(&rec.r),
            opt(&rec.theta),
            opt(&rec.s),
            opt(&rec.gamma),
            ctx.to_decimal(&rec.gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A scalar in text form. Accepts JSON strings or numbers; always writes a string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Decimal(pub String);

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(serde_json::Number),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Text(s) => Decimal(s),
            Raw::Number(n) => Decimal(n.to_string()),
        })
    }
}

impl Decimal {
    pub fn of<C: ScalarContext>(ctx: &C, x: &C::Scalar) -> Self {
        Decimal(ctx.to_decimal(x))
    }

    pub fn parse<C: ScalarContext>(&self, ctx: &C) -> Result<C::Scalar> {
        ctx.parse(&self.0)
    }
}

fn parse_vec<C: ScalarContext>(ctx: &C, v: &[Decimal]) -> Result<Vec<C::Scalar>> {
    v.iter().map(|d| d.parse(ctx)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceSpec {
    Ball {
        dimension: usize,
        target: Vec<Decimal>,
        #[serde(default = "one")]
        radius: Decimal,
        #[serde(default = "two")]
        mu: Decimal,
    },
    Ellipsoid {
        dimension: usize,
        a: Vec<Vec<Decimal>>,
        alpha: Decimal,
        c: Vec<Decimal>,
    },
}

fn one() -> Decimal {
    Decimal("1".into())
}

fn two() -> Decimal {
    Decimal("2".into())
}

impl InstanceSpec {
    pub fn describe<C: ScalarContext>(ctx: &C, inst: &Instance<C::Scalar>) -> Self {
        let dec = |v: &[C::Scalar]| v.iter().map(|x| Decimal::of(ctx, x)).collect::<Vec<_>>();
        match inst {
            Instance::Ball(b) => InstanceSpec::Ball {
                dimension: b.dimension(),
                target: dec(&b.target),
                radius: Decimal::of(ctx, &b.radius),
                mu: Decimal::of(ctx, &b.mu),
            },
            Instance::Ellipsoid(e) => InstanceSpec::Ellipsoid {
                dimension: e.dimension(),
                a: e.shape().rows().map(dec).collect(),
                alpha: Decimal::of(ctx, e.alpha()),
                c: dec(e.linear()),
            },
        }
    }

    pub fn build<C: ScalarContext>(&self, ctx: &C) -> Result<Instance<C::Scalar>> {
        let check = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension { expected, got })
            }
        };
        match self {
            InstanceSpec::Ball {
                dimension,
                target,
                radius,
                mu,
            } => {
                check(*dimension, target.len())?;
                let b = BallInstance::new(ctx, parse_vec(ctx, target)?, radius.parse(ctx)?, mu.parse(ctx)?)?;
                Ok(Instance::Ball(b))
            }
            InstanceSpec::Ellipsoid { dimension, a, alpha, c } => {
                check(*dimension, a.len())?;
                check(*dimension, c.len())?;
                let rows = a.iter().map(|r| parse_vec(ctx, r)).collect::<Result<Vec<_>>>()?;
                let shape = SymMatrix::from_rows(ctx, rows, &ctx.slack())?;
                let e = EllipsoidInstance::new(ctx, shape, alpha.parse(ctx)?, parse_vec(ctx, c)?)?;
                Ok(Instance::Ellipsoid(e))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSpec {
    ExactLineSearch,
    ShortStep,
    Schedule(Vec<Decimal>),
}

impl RuleSpec {
    pub fn describe<C: ScalarContext>(ctx: &C, rule: &StepRule<C::Scalar>) -> Self {
        match rule {
            StepRule::ExactLineSearch => RuleSpec::ExactLineSearch,
            StepRule::ShortStep => RuleSpec::ShortStep,
            StepRule::Schedule(g) => RuleSpec::Schedule(g.iter().map(|x| Decimal::of(ctx, x)).collect()),
        }
    }

    pub fn build<C: ScalarContext>(&self, ctx: &C) -> Result<StepRule<C::Scalar>> {
        Ok(match self {
            RuleSpec::ExactLineSearch => StepRule::ExactLineSearch,
            RuleSpec::ShortStep => StepRule::ShortStep,
            RuleSpec::Schedule(g) => StepRule::Schedule(parse_vec(ctx, g)?),
        })
    }
}

/// Instance JSON descriptor: problem data, stepsize rule and precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub instance: InstanceSpec,
    #[serde(default = "default_rule")]
    pub rule: RuleSpec,
    #[serde(default)]
    pub precision: PrecisionConfig,
}

fn default_rule() -> RuleSpec {
    RuleSpec::ExactLineSearch
}
