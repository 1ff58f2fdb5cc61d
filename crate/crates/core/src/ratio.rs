//! Exact rational helpers: parsing, formatting and serde adapters.
//!
//! Rationals are written as `"3/5"`, `"2"` or finite decimals such as
//! `"0.125"`; all three parse to the exact value.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{invalid, Result};

pub fn ratio(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(value))
}

pub fn parse_ratio(text: &str) -> Result<BigRational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(invalid("empty rational"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| invalid(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d.trim().parse().map_err(|_| invalid(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(invalid(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if !frac.chars().all(|c| c.is_ascii_digit()) || frac.is_empty() {
            return Err(invalid(format!("bad decimal {s:?}")));
        }
        let w: BigInt = if whole_digits.is_empty() {
            BigInt::zero()
        } else {
            whole_digits.parse().map_err(|_| invalid(format!("bad decimal {s:?}")))?
        };
        let f: BigInt = frac.parse().map_err(|_| invalid(format!("bad decimal {s:?}")))?;
        let scale: BigInt = Pow::pow(BigInt::from(10u8), frac.len() as u32);
        let value = BigRational::new(w * &scale + f, scale);
        return Ok(if negative { -value } else { value });
    }
    let n: BigInt = s.parse().map_err(|_| invalid(format!("bad rational {s:?}")))?;
    Ok(BigRational::from_integer(n))
}

pub fn format_ratio(value: &BigRational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Nearest double; saturates to ±inf for values outside the f64 range.
pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub fn is_probability(value: &BigRational) -> bool {
    !value.is_negative() && *value <= BigRational::one()
}

pub mod serde_ratio {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let raw = RatioRepr::deserialize(d)?;
        raw.into_ratio().map_err(D::Error::custom)
    }

    /// Accepts either a string (`"3/5"`) or a JSON number.
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum RatioRepr {
        Text(String),
        Int(i64),
        Float(f64),
    }

    impl RatioRepr {
        pub(crate) fn into_ratio(self) -> Result<BigRational> {
            match self {
                RatioRepr::Text(t) => parse_ratio(&t),
                RatioRepr::Int(i) => Ok(int(i)),
                // Shortest round-trip decimal, then exact.
                RatioRepr::Float(f) => parse_ratio(&format!("{f:?}")),
            }
        }
    }
}

pub mod serde_ratio_vec {
    use super::serde_ratio::RatioRepr;
    use super::*;
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&format_ratio(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BigRational>, D::Error> {
        let raw = Vec::<RatioRepr>::deserialize(d)?;
        raw.into_iter()
            .map(|r| r.into_ratio().map_err(D::Error::custom))
            .collect()
    }
}

/// Maps keyed by a non-negative state, e.g. an initial distribution.
pub mod serde_ratio_map {
    use super::serde_ratio::RatioRepr;
    use super::*;
    use serde::{de::Error as _, ser::SerializeMap, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        values: &BTreeMap<u64, BigRational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(values.len()))?;
        for (k, v) in values {
            map.serialize_entry(&k.to_string(), &format_ratio(v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<u64, BigRational>, D::Error> {
        let raw = BTreeMap::<String, RatioRepr>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                let key = k
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| D::Error::custom(format!("state key {k:?} is not a non-negative integer")))?;
                Ok((key, v.into_ratio().map_err(D::Error::custom)?))
            })
            .collect()
    }
}
