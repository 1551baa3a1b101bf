//! Independent oracles shared by the integration tests.
//!
//! None of these call into the library's arithmetic: exact rationals with a
//! fixed-point Newton square root, a plain `f64` Frank-Wolfe loop, and
//! `nalgebra` for eigenvalues.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Denominator exponent of the fixed-point grid used to keep rationals small.
pub const FIXED_BITS: u32 = 600;

pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `x` rounded down to a multiple of `2^-FIXED_BITS`.
fn truncate(x: &BigRational) -> BigRational {
    let scale = BigInt::one() << FIXED_BITS;
    let n = (x * BigRational::from_integer(scale.clone())).floor().to_integer();
    BigRational::new(n, scale)
}

/// Square root to about `FIXED_BITS` bits by Newton's method from an `f64` seed.
pub fn sqrt_q(x: &BigRational) -> BigRational {
    assert!(!x.is_negative(), "negative radicand");
    if x.is_zero() {
        return BigRational::zero();
    }
    let seed = x.to_f64().expect("finite").sqrt();
    let mut y = BigRational::from_float(seed).expect("finite seed");
    let half = q(1, 2);
    // Quadratic convergence from 50 bits reaches 600 in four steps.
    for _ in 0..6 {
        y = truncate(&(&half * (&y + x / &y)));
    }
    y
}

/// Forward map on exact inputs.
pub fn forward_q(r: &BigRational, s: &BigRational) -> (BigRational, BigRational) {
    let one = BigRational::one();
    let two = q(2, 1);
    let rp1 = &one + r;
    let num = &one - &rp1 * &rp1 * s * s;
    let den = &two - &two * s - (&two + r) * r * s * s;
    (r * s, sqrt_q(&(num / den)))
}

/// `X` and `Y` of the backward map on exact inputs.
pub fn backward_xy_q(r: &BigRational, s: &BigRational) -> (BigRational, BigRational) {
    let one = BigRational::one();
    let rp1 = &one + r;
    let x = &rp1 * s * s - r;
    let y = sqrt_q(&((&one - s * s) * (&one - &rp1 * &rp1 * s * s)));
    (x, y)
}

/// Backward map on exact inputs (stable branch).
pub fn backward_q(r: &BigRational, s: &BigRational) -> (BigRational, BigRational) {
    let (x, y) = backward_xy_q(r, s);
    let z = x + y;
    (r / &z, z)
}

/// Exact rational value of a finite `f64`.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// `|a - b|` as `f64`.
pub fn gap_f64(a: &BigRational, b: &BigRational) -> f64 {
    (a - b).abs().to_f64().unwrap_or(f64::INFINITY)
}

/// Exact line-search Frank-Wolfe on `||x - p||^2` over the unit ball, in
/// plain `f64` with the segment minimiser `<x - p, x - v> / |x - v|^2`.
pub fn plain_fw(x0: &[f64], p: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let mut xs = vec![x0.to_vec()];
    for _ in 0..steps {
        let x = xs.last().unwrap();
        let g: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-12 {
            break;
        }
        let v: Vec<f64> = g.iter().map(|c| -c / gn).collect();
        let d: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - b).collect();
        let dd = d.iter().map(|c| c * c).sum::<f64>();
        let gamma = (g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / dd).clamp(0.0, 1.0);
        let next = x.iter().zip(&v).map(|(a, b)| (1.0 - gamma) * a + gamma * b).collect();
        xs.push(next);
    }
    xs
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Sorted eigenvalues of a symmetric matrix given by rows.
pub fn eigenvalues(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Exact value of a decimal string such as `-1.25e-3`.
pub fn decimal_q(text: &str) -> BigRational {
    let (mant, exp) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().expect("exponent")),
        None => (text, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("digits");
    let shift = exp - frac.len() as i64;
    let pow = num_traits::pow(BigInt::from(10), shift.unsigned_abs() as usize);
    let q = if shift >= 0 {
        BigRational::from_integer(digits * pow)
    } else {
        BigRational::new(digits, pow)
    };
    if neg {
        -q
    } else {
        q
    }
}
