//! Exact rationals, extended reals and a few floating helpers.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational number used for every identity that can be checked exactly.
pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"3"`, `"-2/7"` or a finite decimal such as `"0.125"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Parse(format!("not a rational: {text:?}"));
    if let Some((n, d)) = text.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
        None => (text, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let negative = int_part.starts_with('-');
    let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac_part);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let mut value = Rational::new(
        BigInt::from_str(&digits).map_err(|_| bad())?,
        BigInt::from(10u32).pow(frac_part.len() as u32),
    );
    let ten = int(10);
    for _ in 0..exponent.unsigned_abs() {
        if exponent > 0 {
            value *= &ten;
        } else {
            value /= &ten;
        }
    }
    Ok(if negative { -value } else { value })
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // Both parts overflow f64; shrink them together.
        let shift = value.numer().bits().max(value.denom().bits()).saturating_sub(1000);
        let n = value.numer() >> shift;
        let d = value.denom() >> shift;
        match (n.to_f64(), d.to_f64()) {
            (Some(n), Some(d)) if d != 0.0 => n / d,
            _ => f64::NAN,
        }
    })
}

/// Canonical `p/q` text (integers print without a denominator).
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn serialize_rational<S: Serializer>(value: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(value))
}

pub fn serialize_opt_rational<S: Serializer>(
    value: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match value {
        Some(v) => s.serialize_some(&format_rational(v)),
        None => s.serialize_none(),
    }
}

/// A nonnegative extended real: a finite rational or the symbolic value `+∞`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtendedReal {
    Finite(Rational),
    Infinite,
}

impl ExtendedReal {
    pub fn zero() -> Self {
        ExtendedReal::Finite(Rational::zero())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedReal::Infinite)
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    pub fn add(&self, other: &ExtendedReal) -> ExtendedReal {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }

    /// Multiplication by a nonnegative scalar, with `0 · ∞ = 0`.
    pub fn scale(&self, c: &Rational) -> ExtendedReal {
        debug_assert!(!c.is_negative());
        match self {
            ExtendedReal::Finite(a) => ExtendedReal::Finite(a * c),
            ExtendedReal::Infinite if c.is_zero() => ExtendedReal::zero(),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => f.write_str(&format_rational(v)),
            ExtendedReal::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Pairwise summation in fixed index order; bit-stable for a given input slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().fold(0.0, |acc, v| acc + v)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Falling factorial `k (k-1) … (k-s+1)` as an exact integer rational.
pub fn falling_factorial(k: usize, s: usize) -> Rational {
    if s > k {
        return Rational::zero();
    }
    (0..s).fold(Rational::one(), |acc, j| acc * int((k - j) as i64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/12").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("0.2").unwrap(), rat(1, 5));
        assert_eq!(parse_rational("-1.25").unwrap(), rat(-5, 4));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert_eq!(parse_rational("2.5e-1").unwrap(), rat(1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn extended_real_arithmetic() {
        let inf = ExtendedReal::Infinite;
        assert_eq!(inf.scale(&Rational::zero()), ExtendedReal::zero());
        assert!(inf.add(&ExtendedReal::Finite(int(1))).is_infinite());
        assert_eq!(inf.to_string(), "inf");
        assert_eq!(ExtendedReal::Finite(rat(3, 6)).to_string(), "1/2");
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Rational::new(BigInt::from(3) * BigInt::from(10).pow(400), BigInt::from(10).pow(400));
        assert!((to_f64(&big) - 3.0).abs() < 1e-12);
    }
}
