use super::{PrecisionConfig, Scalar, ScalarContext, HARDWARE_BITS};
use crate::error::{Error, Result};

impl Scalar for f64 {
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

/// IEEE-754 double precision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HardwareContext;

impl ScalarContext for HardwareContext {
    type Scalar = f64;

    fn config(&self) -> PrecisionConfig {
        PrecisionConfig::hardware()
    }

    fn mantissa_bits(&self) -> u32 {
        HARDWARE_BITS
    }

    fn from_f64(&self, x: f64) -> f64 {
        x
    }

    fn from_i64(&self, n: i64) -> f64 {
        n as f64
    }

    fn parse(&self, s: &str) -> Result<f64> {
        s.trim().parse().map_err(|_| Error::Parse(s.to_owned()))
    }

    fn to_decimal(&self, x: &f64) -> String {
        if x.is_finite() {
            format!("{:.*e}", self.decimal_digits() - 1, x)
        } else {
            x.to_string()
        }
    }

    fn pow2(&self, k: i32) -> f64 {
        2f64.powi(k)
    }
}
