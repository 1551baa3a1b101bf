//! Scalar backends.
//!
//! Every dynamics routine in this crate is generic over a [`ScalarContext`],
//! which hands out scalars of one fixed mantissa width. Two backends exist:
//! hardware `f64` ([`HardwareContext`]) and radix-2 arbitrary precision
//! ([`ExtendedContext`], backed by `astro-float`). Rounding is always
//! round-to-nearest-even.

mod extended;
mod hardware;

use std::fmt;
use std::ops::Neg;

use num_traits::{NumOps, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extended::{BigReal, ExtendedContext};
pub use hardware::HardwareContext;

/// Mantissa width of an IEEE-754 double.
pub const HARDWARE_BITS: u32 = 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    Hardware,
    Extended,
}

/// Which backend to use and, for the extended one, how many mantissa bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub mode: PrecisionMode,
    pub mantissa_bits: u32,
}

impl PrecisionConfig {
    pub fn hardware() -> Self {
        Self {
            mode: PrecisionMode::Hardware,
            mantissa_bits: HARDWARE_BITS,
        }
    }

    pub fn extended(mantissa_bits: u32) -> Self {
        Self {
            mode: PrecisionMode::Extended,
            mantissa_bits,
        }
    }

    /// `bits == 53` selects the hardware backend, anything wider the extended one.
    pub fn from_bits(bits: u32) -> Self {
        if bits == HARDWARE_BITS {
            Self::hardware()
        } else {
            Self::extended(bits)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PrecisionMode::Hardware => Ok(()),
            PrecisionMode::Extended if self.mantissa_bits < HARDWARE_BITS => {
                Err(Error::InvalidPrecision(self.mantissa_bits))
            }
            PrecisionMode::Extended => Ok(()),
        }
    }
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self::hardware()
    }
}

impl fmt::Display for PrecisionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            PrecisionMode::Hardware => write!(f, "hardware(53)"),
            PrecisionMode::Extended => write!(f, "extended({})", self.mantissa_bits),
        }
    }
}

/// Field operations shared by both backends.
///
/// `Display` writes a decimal string that round-trips through
/// [`ScalarContext::parse`] of a context with the same width.
pub trait Scalar:
    Clone
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + NumOps
    + for<'a> NumOps<&'a Self>
    + Neg<Output = Self>
    + ToPrimitive
{
    fn sqrt(&self) -> Self;
    fn abs(&self) -> Self;
    fn is_finite(&self) -> bool;
    fn is_zero(&self) -> bool;

    fn square(&self) -> Self {
        self.clone() * self
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Lossy conversion for diagnostics, logs and plots.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Factory for scalars of a fixed width.
pub trait ScalarContext: Clone + Send + Sync + fmt::Debug {
    type Scalar: Scalar;

    fn config(&self) -> PrecisionConfig;

    /// Effective mantissa width of the scalars this context produces.
    fn mantissa_bits(&self) -> u32;

    // Conversions need the context for its precision.
    #[allow(clippy::wrong_self_convention)]
    fn from_f64(&self, x: f64) -> Self::Scalar;
    #[allow(clippy::wrong_self_convention)]
    fn from_i64(&self, n: i64) -> Self::Scalar;
    fn parse(&self, s: &str) -> Result<Self::Scalar>;

    /// Decimal string with [`decimal_digits`](Self::decimal_digits) significant digits.
    fn to_decimal(&self, x: &Self::Scalar) -> String;

    /// `2^k`, exact.
    fn pow2(&self, k: i32) -> Self::Scalar;

    fn zero(&self) -> Self::Scalar {
        self.from_i64(0)
    }

    fn one(&self) -> Self::Scalar {
        self.from_i64(1)
    }

    /// `num / den`, correctly rounded.
    fn ratio(&self, num: i64, den: i64) -> Self::Scalar {
        self.from_i64(num) / self.from_i64(den)
    }

    /// Significant decimal digits needed for a lossless round trip.
    fn decimal_digits(&self) -> usize {
        (f64::from(self.mantissa_bits()) * 0.302).ceil() as usize + 2
    }

    /// Unit roundoff scale `2^(1 - bits)`.
    fn epsilon(&self) -> Self::Scalar {
        self.pow2(1 - self.mantissa_bits() as i32)
    }

    /// Boundary slack `2^(-bits/2)` used for radicand clamping and domain checks.
    fn slack(&self) -> Self::Scalar {
        self.pow2(-((self.mantissa_bits() / 2) as i32))
    }

    /// Residuals at or below this value count as "reached the target".
    fn termination_threshold(&self) -> Self::Scalar {
        self.slack()
    }
}

/// Runtime-selected backend, as produced by [`make_context`].
#[derive(Debug, Clone)]
pub enum Backend {
    Hardware(HardwareContext),
    Extended(ExtendedContext),
}

impl Backend {
    pub fn config(&self) -> PrecisionConfig {
        match self {
            Backend::Hardware(c) => c.config(),
            Backend::Extended(c) => c.config(),
        }
    }
}

pub fn make_context(cfg: PrecisionConfig) -> Result<Backend> {
    cfg.validate()?;
    Ok(match cfg.mode {
        PrecisionMode::Hardware => Backend::Hardware(HardwareContext),
        PrecisionMode::Extended => Backend::Extended(ExtendedContext::new(cfg.mantissa_bits)?),
    })
}

/// Sum of `x_i * y_i`.
pub(crate) fn dot<S: Scalar>(zero: S, x: &[S], y: &[S]) -> S {
    x.iter().zip(y).fold(zero, |acc, (a, b)| acc + a.clone() * b)
}
