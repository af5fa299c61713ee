//! Number types used by the exact/float dual-mode dynamic programs.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arithmetic needed by the percolation and urn recursions. Implemented for
/// `f64` and for exact `BigRational`.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &BigRational) -> Self;
    /// Exact conversion of a float (dyadic rational for `BigRational`).
    fn from_f64(x: f64) -> Self;
    fn to_float(&self) -> f64;
    /// `self^exponent` for a (possibly non-integer) growth exponent.
    /// Exact types return `None` for non-integer exponents.
    fn pow_growth(&self, exponent: &BigRational) -> Option<Self>;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_float(&self) -> f64 {
        *self
    }
    fn pow_growth(&self, exponent: &BigRational) -> Option<Self> {
        let e = rational_to_f64(exponent);
        if *self <= 0.0 {
            return Some(if e == 0.0 { 1.0 } else { 0.0 });
        }
        // log space: exponents can be astronomically large
        Some((e * self.ln()).exp())
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(Zero::zero)
    }
    fn to_float(&self) -> f64 {
        rational_to_f64(self)
    }
    fn pow_growth(&self, exponent: &BigRational) -> Option<Self> {
        if !exponent.is_integer() || exponent.is_negative() {
            return None;
        }
        let e = exponent.to_integer().to_u32()?;
        Some(num::pow::pow(self.clone(), e as usize))
    }
}

/// Float value of a big rational without overflowing on huge numerators.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(x) = r.to_f64() {
        if x.is_finite() {
            return x;
        }
    }
    // scale both sides down to keep the quotient representable
    let n = r.numer();
    let d = r.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift_n = (nb - 900).max(0) as usize;
    let shift_d = (db - 900).max(0) as usize;
    let nf = (n >> shift_n).to_f64().unwrap_or(f64::NAN);
    let df = (d >> shift_d).to_f64().unwrap_or(f64::NAN);
    nf / df * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parse `"3/4"`, `"0.01"`, `"-2"`, `"1e-3"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::param("rational", format!("cannot parse `{s}` as a rational"));
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| bad())?;
        let d: BigInt = b.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let n: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(n * num::pow::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num::pow::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// `"num/den"` (or just `"num"` for integers).
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn serialize_rational<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

pub fn serialize_rational_opt<S: serde::Serializer>(
    r: &Option<BigRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&format_rational(r)),
        None => s.serialize_none(),
    }
}

pub fn serialize_rationals_opt<S: serde::Serializer>(
    r: &Option<Vec<BigRational>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    match r {
        Some(v) => {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&format_rational(x))?;
            }
            seq.end()
        }
        None => s.serialize_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.01").unwrap(), ratio(1, 100));
        assert_eq!(parse_rational("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("-2").unwrap(), ratio(-2, 1));
        assert_eq!(parse_rational("1.5e-2").unwrap(), ratio(3, 200));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn huge_rationals_convert() {
        let big = BigRational::new(
            num::pow::pow(BigInt::from(3), 2000),
            num::pow::pow(BigInt::from(3), 2000) * BigInt::from(4),
        );
        assert!((rational_to_f64(&big) - 0.25).abs() < 1e-15);
        let r = BigRational::new(BigInt::from(1), num::pow::pow(BigInt::from(2), 1100) + 1);
        assert_eq!(rational_to_f64(&r), 0.0);
    }

    #[test]
    fn growth_powers() {
        assert_eq!(
            ratio(1, 2).pow_growth(&ratio(3, 1)).unwrap(),
            ratio(1, 8)
        );
        assert!(ratio(1, 2).pow_growth(&ratio(3, 2)).is_none());
        let x = 0.25f64.pow_growth(&ratio(1, 2)).unwrap();
        assert!((x - 0.5).abs() < 1e-15);
        assert_eq!(0.0f64.pow_growth(&ratio(2, 1)).unwrap(), 0.0);
    }
}
