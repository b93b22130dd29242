//! Exact rational helpers: parsing of decimal and `p/q` literals, rendering,
//! and lossy conversion to `f64`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary precision rational used by the exact code paths.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"3"`, `"-3/4"`, `"0.0648"`, `".5"` or `"1.5e-3"` into an exact rational.
///
/// Decimal literals are read exactly, so `"0.1"` is `1/10` and never the
/// binary approximation of it.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    let err = || ParseRationalError(text.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| err())?;
        let d: BigInt = den.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(all_digits.parse::<BigInt>().map_err(|_| err())?);
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return Err(err());
    }
    let ten = Rational::from_integer(BigInt::from(10));
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Ok(if negative { -value } else { value })
}

/// Canonical `p/q` rendering (`p` alone for integers).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest `f64`; used only for informative decimal renderings and for
/// handing exact tables to the floating-point eigen code.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact value of a finite `f64`.
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Exact decimal rendering when the denominator has only factors 2 and 5.
pub fn to_exact_decimal(r: &Rational) -> Option<String> {
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let ten = BigInt::from(10);
    let mut den = r.denom().clone();
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scaled = r.numer() * num_traits::pow(ten.clone(), places) / r.denom();
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    if places == 0 {
        return Some(if negative { format!("-{digits}") } else { digits });
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    let sign = if negative { "-" } else { "" };
    Some(format!("{sign}{int_part}.{frac_part}"))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Serde adapter storing a rational as its `p/q` string.
pub mod serde_string {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = StringOrNumber::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }

    /// Accepts `"1/4"`, `"0.25"` or a bare JSON number (read via its literal text).
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum StringOrNumber {
        Text(String),
        Number(serde_json::Number),
    }

    impl StringOrNumber {
        pub(crate) fn parse(&self) -> Result<Rational, super::ParseRationalError> {
            match self {
                StringOrNumber::Text(t) => parse_rational(t),
                StringOrNumber::Number(n) => parse_rational(&n.to_string()),
            }
        }
    }
}

/// Serde adapter for `Vec<Rational>` as a list of strings.
pub mod serde_string_vec {
    use super::serde_string::StringOrNumber;
    use super::{format_rational, Rational};
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&format_rational(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<StringOrNumber>::deserialize(d)?;
        raw.iter()
            .map(|t| t.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serialize-only adapter writing `{"exact": "p/q", "decimal": x}`.
pub mod serde_exact {
    use super::{format_rational, to_f64, Rational};
    use serde::ser::SerializeStruct;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Exact", 2)?;
        st.serialize_field("exact", &format_rational(r))?;
        st.serialize_field("decimal", &to_f64(r))?;
        st.end()
    }
}
