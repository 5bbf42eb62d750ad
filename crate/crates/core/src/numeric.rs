//! Exact numbers.
//!
//! Configuration values are parsed into [`Rational`]s. Positions inside the
//! engine are integer *ticks*: one tick is `τμ / scale`, so every cell
//! boundary, disturbance bound and input displacement is an exact integer and
//! runs are reproducible bit for bit.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = Ratio<i64>;

/// Times and products of ticks; wide enough for cross-multiplication.
pub type Wide = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{input}` as an exact number: {reason}")]
pub struct ParseNumError {
    pub input: String,
    pub reason: &'static str,
}

/// Parses `"3"`, `"-1.25"` or `"19/2"` exactly.
pub fn parse_rational(input: &str) -> Result<Rational, ParseNumError> {
    let s = input.trim();
    let err = |reason| ParseNumError {
        input: input.to_string(),
        reason,
    };
    if s.is_empty() {
        return Err(err("empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| err("bad numerator"))?;
        let d: i64 = den.trim().parse().map_err(|_| err("bad denominator"))?;
        if d == 0 {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("unexpected character"));
    }
    if frac_part.len() > 15 {
        return Err(err("too many decimal places"));
    }
    let digits = format!("{int_part}{frac_part}");
    let n: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| err("overflow"))? };
    let d = 10i64.pow(frac_part.len() as u32);
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

/// Decimal rendering when the value terminates, `p/q` otherwise.
pub fn format_rational(r: Rational) -> String {
    let mut den = *r.denom();
    while den % 2 == 0 {
        den /= 2;
    }
    while den % 5 == 0 {
        den /= 5;
    }
    if den != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let neg = r.is_negative();
    let a = r.abs();
    let int = a.to_integer();
    let mut frac = a - Rational::from_integer(int);
    let mut out = format!("{}{}.", if neg { "-" } else { "" }, int);
    while !frac.is_zero() {
        frac *= 10;
        let digit = frac.to_integer();
        out.push(char::from(b'0' + digit as u8));
        frac -= Rational::from_integer(digit);
    }
    out
}

pub fn ceil_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    -((-a).div_euclid(b))
}

pub fn floor_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    a.div_euclid(b)
}

pub fn wide(a: i64, b: i64) -> Wide {
    Wide::new(a as i128, b as i128)
}

/// A config number: accepts TOML integers, floats (via their shortest decimal
/// form) and strings in decimal or `p/q` notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Num(pub Rational);

impl Num {
    pub fn int(v: i64) -> Self {
        Num(Rational::from_integer(v))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Num(Rational::new(n, d))
    }
}

impl From<Rational> for Num {
    fn from(r: Rational) -> Self {
        Num(r)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(self.0))
    }
}

impl FromStr for Num {
    type Err = ParseNumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s).map(Num)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            serializer.serialize_i64(self.0.to_integer())
        } else {
            serializer.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string such as \"19/2\" or \"9.5\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num::int(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                i64::try_from(v).map(Num::int).map_err(|_| E::custom("integer too large"))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                if !v.is_finite() {
                    return Err(E::custom("non-finite number"));
                }
                parse_rational(&format!("{v}")).map(Num).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                parse_rational(v).map(Num).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(NumVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_forms() {
        assert_eq!(parse_rational("9.5").unwrap(), Rational::new(19, 2));
        assert_eq!(parse_rational("19/2").unwrap(), Rational::new(19, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::new(-1, 4));
        assert_eq!(parse_rational("3").unwrap(), Rational::from_integer(3));
        assert_eq!(parse_rational(".5").unwrap(), Rational::new(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn formats_terminating_and_repeating() {
        assert_eq!(format_rational(Rational::new(5, 2)), "2.5");
        assert_eq!(format_rational(Rational::new(-1, 8)), "-0.125");
        assert_eq!(format_rational(Rational::new(1, 3)), "1/3");
        assert_eq!(format_rational(Rational::from_integer(-4)), "-4");
    }

    #[test]
    fn float_config_values_are_exact() {
        #[derive(Deserialize)]
        struct T {
            a: Num,
            b: Num,
            c: Num,
        }
        let t: T = toml::from_str("a = 0.1\nb = \"7/3\"\nc = 4").unwrap();
        assert_eq!(t.a.0, Rational::new(1, 10));
        assert_eq!(t.b.0, Rational::new(7, 3));
        assert_eq!(t.c.0, Rational::from_integer(4));
    }

    #[test]
    fn integer_division_helpers_round_correctly() {
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(ceil_div(-7, 2), -3);
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(ceil_div(6, 3), 2);
    }
}
