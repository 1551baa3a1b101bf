use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_traits::ToPrimitive;

use super::{PrecisionConfig, Scalar, ScalarContext, HARDWARE_BITS};
use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;
const WORD_BITS: u32 = 64;
/// Extra bits carried through decimal conversions.
const GUARD_BITS: usize = 128;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

/// Arbitrary-precision binary float.
///
/// The width travels with the value; binary operations round to the wider
/// of the two operands.
#[derive(Debug)]
pub struct BigReal(BigFloat);

impl BigReal {
    pub fn precision(&self) -> usize {
        self.0.mantissa_max_bit_len().unwrap_or(WORD_BITS as usize)
    }

    pub fn inner(&self) -> &BigFloat {
        &self.0
    }

    fn wider(&self, other: &Self) -> usize {
        self.precision().max(other.precision())
    }

    /// Decimal string with `digits` significant digits, rounded half-to-even.
    pub fn to_decimal_digits(&self, digits: usize) -> String {
        if self.0.is_nan() {
            return "NaN".into();
        }
        if self.0.is_inf_pos() {
            return "inf".into();
        }
        if self.0.is_inf_neg() {
            return "-inf".into();
        }
        if self.0.is_zero() {
            return "0e0".into();
        }
        let mut wide = self.0.clone();
        // Widening is exact.
        if wide.set_precision(self.precision() + GUARD_BITS, RM).is_err() {
            return "NaN".into();
        }
        let converted = CONSTS.with(|cc| wide.convert_to_radix(Radix::Dec, RM, &mut cc.borrow_mut()));
        let (sign, mut mantissa, mut exp) = match converted {
            Ok(parts) => parts,
            Err(_) => return "NaN".into(),
        };
        while mantissa.len() > 1 && mantissa.last() == Some(&0) {
            mantissa.pop();
        }
        if mantissa.len() > digits {
            let tail = &mantissa[digits..];
            let first = tail[0];
            let rest_nonzero = tail[1..].iter().any(|&d| d != 0);
            let round_up = first > 5 || (first == 5 && (rest_nonzero || mantissa[digits - 1] % 2 == 1));
            mantissa.truncate(digits);
            if round_up {
                let mut i = digits;
                loop {
                    if i == 0 {
                        mantissa.insert(0, 1);
                        mantissa.truncate(digits);
                        exp += 1;
                        break;
                    }
                    i -= 1;
                    if mantissa[i] == 9 {
                        mantissa[i] = 0;
                    } else {
                        mantissa[i] += 1;
                        break;
                    }
                }
            }
            while mantissa.len() > 1 && mantissa.last() == Some(&0) {
                mantissa.pop();
            }
        }
        let mut out = String::with_capacity(mantissa.len() + 12);
        if sign == Sign::Neg {
            out.push('-');
        }
        out.push(char::from(b'0' + mantissa[0]));
        if mantissa.len() > 1 {
            out.push('.');
            out.extend(mantissa[1..].iter().map(|&d| char::from(b'0' + d)));
        }
        // `convert_to_radix` returns 0.d1d2... * 10^exp.
        out.push('e');
        out.push_str(&(i64::from(exp) - 1).to_string());
        out
    }

    fn from_bigfloat(x: BigFloat) -> Self {
        BigReal(x)
    }
}

impl Clone for BigReal {
    fn clone(&self) -> Self {
        BigReal(self.0.clone())
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = (self.precision() as f64 * 0.302).ceil() as usize + 2;
        f.write_str(&self.to_decimal_digits(digits))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, |$a:ident, $b:ident, $p:ident| $body:expr) => {
        impl $trait<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                let ($a, $b) = (&self.0, &rhs.0);
                let $p = self.wider(rhs);
                BigReal($body)
            }
        }
        impl $trait<&BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                (&self).$method(rhs)
            }
        }
        impl $trait<BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: BigReal) -> BigReal {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b, p| a.add(b, p, RM));
binop!(Sub, sub, |a, b, p| a.sub(b, p, RM));
binop!(Mul, mul, |a, b, p| a.mul(b, p, RM));
binop!(Div, div, |a, b, p| a.div(b, p, RM));
binop!(Rem, rem, |a, b, _p| a.rem(b));

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal(self.0.neg())
    }
}

impl ToPrimitive for BigReal {
    fn to_i64(&self) -> Option<i64> {
        self.to_f64().and_then(|f| f.to_i64())
    }

    fn to_u64(&self) -> Option<u64> {
        self.to_f64().and_then(|f| f.to_u64())
    }

    fn to_f64(&self) -> Option<f64> {
        let x = &self.0;
        if x.is_nan() {
            return Some(f64::NAN);
        }
        if x.is_inf_pos() {
            return Some(f64::INFINITY);
        }
        if x.is_inf_neg() {
            return Some(f64::NEG_INFINITY);
        }
        if x.is_zero() {
            return Some(0.0);
        }
        let (words, _, sign, exp, _) = x.as_raw_parts()?;
        let top = *words.last()? as f64 / 2f64.powi(64);
        let mag = scale_by_pow2(top, exp);
        Some(if sign == Sign::Neg { -mag } else { mag })
    }
}

fn scale_by_pow2(mut x: f64, mut e: i32) -> f64 {
    while e > 512 {
        x *= 2f64.powi(512);
        e -= 512;
    }
    while e < -512 {
        x *= 2f64.powi(-512);
        e += 512;
    }
    x * 2f64.powi(e)
}

impl Scalar for BigReal {
    fn sqrt(&self) -> Self {
        BigReal(self.0.sqrt(self.precision(), RM))
    }

    fn abs(&self) -> Self {
        BigReal(self.0.abs())
    }

    fn is_finite(&self) -> bool {
        !(self.0.is_nan() || self.0.is_inf())
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// Arbitrary-precision backend.
///
/// `astro-float` stores mantissas in whole 64-bit words, so the effective
/// width is the requested width rounded up to a multiple of 64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtendedContext {
    requested: u32,
    effective: u32,
}

impl ExtendedContext {
    pub fn new(bits: u32) -> Result<Self> {
        if bits < HARDWARE_BITS {
            return Err(Error::InvalidPrecision(bits));
        }
        Ok(Self {
            requested: bits,
            effective: bits.div_ceil(WORD_BITS) * WORD_BITS,
        })
    }

    pub fn requested_bits(&self) -> u32 {
        self.requested
    }

    fn p(&self) -> usize {
        self.effective as usize
    }
}

impl ScalarContext for ExtendedContext {
    type Scalar = BigReal;

    fn config(&self) -> PrecisionConfig {
        PrecisionConfig::extended(self.requested)
    }

    fn mantissa_bits(&self) -> u32 {
        self.effective
    }

    fn from_f64(&self, x: f64) -> BigReal {
        BigReal(BigFloat::from_f64(x, self.p()))
    }

    fn from_i64(&self, n: i64) -> BigReal {
        BigReal(BigFloat::from_i64(n, self.p()))
    }

    fn parse(&self, s: &str) -> Result<BigReal> {
        let t = s.trim();
        if t.is_empty() {
            return Err(Error::Parse(s.to_owned()));
        }
        let mut x = CONSTS.with(|cc| BigFloat::parse(t, Radix::Dec, self.p() + GUARD_BITS, RM, &mut cc.borrow_mut()));
        if x.is_nan() {
            return Err(Error::Parse(s.to_owned()));
        }
        x.set_precision(self.p(), RM).map_err(|_| Error::Parse(s.to_owned()))?;
        Ok(BigReal::from_bigfloat(x))
    }

    fn to_decimal(&self, x: &BigReal) -> String {
        x.to_decimal_digits(self.decimal_digits())
    }

    fn pow2(&self, k: i32) -> BigReal {
        let mut one = BigFloat::from_u32(1, self.p());
        // Mantissa is normalised to [1/2, 1): 1 = 0.1b * 2^1.
        one.set_exponent(k + 1);
        BigReal(one)
    }
}
