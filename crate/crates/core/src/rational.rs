//! Exact rational helpers: parsing, `num/den` rendering and fixed-place
//! decimal rendering.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"num/den"`, an integer, or a finite decimal such as `"0.05"`
/// into an exact rational. Decimals are read digit by digit so `"0.1"` is
/// exactly one tenth.
pub fn parse(s: &str) -> Result<Rational> {
    let t = s.trim();
    let err = || Error::ParseRational(s.to_string());
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| err())? };
    let den = num::pow(BigInt::from(10), frac.len());
    let q = Rational::new(num, den);
    Ok(if neg { -q } else { q })
}

/// Always `num/den`, including integers (`"1/1"`).
pub fn to_fraction(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Exact decimal rendering rounded half away from zero.
pub fn to_decimal(q: &Rational, places: usize) -> String {
    let scale = Rational::from_integer(num::pow(BigInt::from(10), places));
    let scaled = q.abs() * scale;
    let rounded = (scaled + ratio(1, 2)).floor().to_integer();
    let digits = rounded.to_string();
    let sign = if q.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (w, f) = padded.split_at(padded.len() - places);
    format!("{sign}{w}.{f}")
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Ratios of huge integers overflow the direct conversion.
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn clamp_unit(q: Rational) -> Rational {
    if q.is_negative() {
        zero()
    } else if q > one() {
        one()
    } else {
        q
    }
}

pub fn in_unit_interval(q: &Rational) -> bool {
    !q.is_negative() && *q <= one()
}

pub(crate) mod serde_fraction {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_fraction(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
            match q {
                Some(q) => s.serialize_some(&to_fraction(q)),
                None => s.serialize_none(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!(parse("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse("7").unwrap(), int(7));
        assert_eq!(parse("0.1").unwrap(), ratio(1, 10));
        assert_eq!(parse("-.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse("0.03125").unwrap(), ratio(1, 32));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("1e-3").is_err());
        assert!(parse(".").is_err());
    }

    #[test]
    fn renders_decimals_exactly() {
        assert_eq!(to_decimal(&ratio(1, 32), 6), "0.031250");
        assert_eq!(to_decimal(&ratio(39680, 78125), 6), "0.507904");
        assert_eq!(to_decimal(&ratio(2, 3), 6), "0.666667");
        assert_eq!(to_decimal(&ratio(-1, 3), 2), "-0.33");
        assert_eq!(to_decimal(&int(10), 1), "10.0");
        assert_eq!(to_decimal(&ratio(1, 2), 0), "1");
        assert_eq!(to_fraction(&int(1)), "1/1");
    }
}
