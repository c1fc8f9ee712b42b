//! Numeric backends.
//!
//! Every algorithm in the crate is generic over [`Scalar`], so the same code
//! runs in `f64` or in exact rational arithmetic. Exact ties (and therefore
//! tie-breaking and equilibrium enumeration) are only meaningful with
//! [`Rational`].

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary precision rational number.
pub type Rational = num_rational::BigRational;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Converts a finite float. Rationals take the shortest decimal
    /// representation, so `0.1` becomes exactly `1/10`.
    fn from_f64(x: f64) -> Self;
    fn from_rational(x: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn is_exact() -> bool;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn from_usize(n: usize) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(n)))
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            Self::zero() - self.clone()
        } else {
            self.clone()
        }
    }

    fn powu(&self, mut n: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base.clone();
            }
            n >>= 1;
            if n > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }

    /// `p/q` form for exact backends.
    fn fraction(&self) -> Option<String> {
        None
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn from_rational(x: &Rational) -> Self {
        Scalar::to_f64(x)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_exact() -> bool {
        false
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Scalar for Rational {
    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite value {x} cannot be made rational");
        parse_exact(&format!("{x:e}")).expect("float formatting is always parseable")
    }

    fn from_rational(x: &Rational) -> Self {
        x.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // numerator or denominator too large for a direct conversion
            let shift = self.denom().bits().max(self.numer().bits()).saturating_sub(900);
            let n = (self.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (self.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    fn is_exact() -> bool {
        true
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn fraction(&self) -> Option<String> {
        Some(if self.is_integer() { self.numer().to_string() } else { format!("{}/{}", self.numer(), self.denom()) })
    }
}

/// Parses `"2/3"`, `"-0.25"`, `"1e-3"` or `"7"` into an exact rational.
pub fn parse_exact(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n = parse_exact(n)?;
        let d = parse_exact(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Ten significant digits, plus the exact fraction when it is short enough
/// to be readable.
pub fn display_value<S: Scalar>(x: &S) -> String {
    let f = x.to_f64();
    let sig = format_sig(f, 10);
    match x.fraction() {
        Some(frac) if frac.len() <= 40 && frac != sig => format!("{sig} ({frac})"),
        _ => sig,
    }
}

pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    if (-5..15).contains(&magnitude) {
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.prec$e}", prec = digits - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn decimal_floats_become_exact_decimals() {
        assert_eq!(Rational::from_f64(0.1), q(1, 10));
        assert_eq!(Rational::from_f64(0.9), q(9, 10));
        assert_eq!(Rational::from_f64(-2.5e-3), q(-25, 10000));
        assert_eq!(Rational::from_f64(3.0), q(3, 1));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_exact("2/3"), Some(q(2, 3)));
        assert_eq!(parse_exact(" 0.25 "), Some(q(1, 4)));
        assert_eq!(parse_exact("1e2"), Some(q(100, 1)));
        assert_eq!(parse_exact("1/0"), None);
        assert_eq!(parse_exact("abc"), None);
        assert_eq!(parse_exact("."), None);
    }

    #[test]
    fn huge_rationals_still_convert() {
        let tiny = q(9, 10).powu(2000);
        let f = Scalar::to_f64(&tiny);
        let expected = 2000.0 * 0.9f64.ln();
        assert!((f.ln() - expected).abs() < 1e-9);
    }

    #[test]
    fn powu_matches_repeated_product() {
        let x = q(3, 7);
        let mut acc = Rational::one();
        for n in 0..12u64 {
            assert_eq!(x.powu(n), acc);
            acc = acc * x.clone();
        }
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.296000001, 10), "0.296000001");
        assert_eq!(format_sig(9.0, 10), "9");
        assert_eq!(display_value(&q(2, 3)), "0.6666666667 (2/3)");
        assert_eq!(display_value(&q(8, 1)), "8");
    }
}
