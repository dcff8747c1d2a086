//! Rendering of reals with 17 significant digits, which round-trips every
//! finite `f64` bit-exactly.
//!
//! The serde helpers emit JSON numbers verbatim (this relies on serde_json's
//! `arbitrary_precision` feature). Non-finite values are written as the
//! strings `"inf"`, `"-inf"` and `"nan"`.

use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Formats `x` with 17 significant digits.
///
/// Positional notation is used for decimal exponents in `[-5, 17)`,
/// scientific notation otherwise.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{:.16e}", x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        sci
    }
}

/// Parses the output of [`fmt17`] (and any ordinary float literal).
pub fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        "nan" | "NaN" => Some(f64::NAN),
        t => f64::from_str(t).ok(),
    }
}

pub fn serialize<S: Serializer>(x: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    let text = fmt17(*x);
    if x.is_finite() {
        let num = serde_json::Number::from_str(&text).map_err(serde::ser::Error::custom)?;
        num.serialize(serializer)
    } else {
        serializer.serialize_str(&text)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    struct RealVisitor;

    impl<'de> Visitor<'de> for RealVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a real number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            parse_real(v).ok_or_else(|| E::custom(format!("not a real: {v:?}")))
        }

        fn visit_map<A: de::MapAccess<'de>>(self, map: A) -> Result<f64, A::Error> {
            // arbitrary_precision hands numbers over as a single-entry map.
            let num = serde_json::Number::deserialize(de::value::MapAccessDeserializer::new(map))?;
            parse_real(&num.to_string())
                .ok_or_else(|| de::Error::custom(format!("not a real: {num}")))
        }
    }

    deserializer.deserialize_any(RealVisitor)
}

/// Serde helpers for `Vec<f64>`.
pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    #[derive(Deserialize)]
    struct Wrapped(#[serde(with = "super")] f64);

    pub fn serialize<S: Serializer>(xs: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&Real(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Wrapped> = Vec::deserialize(deserializer)?;
        Ok(v.into_iter().map(|w| w.0).collect())
    }
}

/// Serde helpers for `Vec<Vec<f64>>` (row-major matrices).
pub mod matrix {
    use super::*;
    use serde::ser::SerializeSeq;

    #[derive(Deserialize)]
    struct Row(#[serde(with = "super::vec")] Vec<f64>);

    struct RowRef<'a>(&'a [f64]);

    impl Serialize for RowRef<'_> {
        fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
            super::vec::serialize(self.0, serializer)
        }
    }

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(rows.len()))?;
        for r in rows {
            seq.serialize_element(&RowRef(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Vec<Vec<f64>>, D::Error> {
        let v: Vec<Row> = Vec::deserialize(deserializer)?;
        Ok(v.into_iter().map(|r| r.0).collect())
    }
}

/// Serde helpers for `Option<f64>`.
pub mod option {
    use super::*;

    #[derive(Deserialize)]
    struct Wrapped(#[serde(with = "super")] f64);

    pub fn serialize<S: Serializer>(x: &Option<f64>, serializer: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => serializer.serialize_some(&Real(*v)),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrapped>::deserialize(deserializer)?.map(|w| w.0))
    }
}

/// A real that serializes with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize(&self.0, serializer)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserialize(deserializer).map(Real)
    }
}
