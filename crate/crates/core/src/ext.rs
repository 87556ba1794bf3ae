//! Extended reals `(-inf, +inf]` and their serialized form.
//!
//! Infinite values are written as the strings `"inf"` / `"-inf"`; NaN is
//! never produced by the serializers.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PositiveInfinity,
}

impl ExtReal {
    /// Maps `+inf` to `PositiveInfinity`; NaN and `-inf` are rejected.
    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_finite() {
            Some(ExtReal::Finite(x))
        } else if x == f64::INFINITY {
            Some(ExtReal::PositiveInfinity)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        !self.is_finite()
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PositiveInfinity => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::PositiveInfinity => f64::INFINITY,
        }
    }

    /// Multiplication by a strictly positive finite scalar.
    pub fn scale(self, s: f64) -> Self {
        debug_assert!(s > 0.0 && s.is_finite());
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x * s),
            inf => inf,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x).expect("ExtReal from NaN or -inf")
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PositiveInfinity => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_f64(&self.to_f64(), s)
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = deserialize_f64(d)?;
        ExtReal::from_f64(x).ok_or_else(|| de::Error::custom("ExtReal cannot be -inf"))
    }
}

/// Formats a float the way every report and CSV in this crate does.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        panic!("NaN reached the output layer");
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

pub fn serialize_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        Err(serde::ser::Error::custom("refusing to serialize NaN"))
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn deserialize_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    struct V;
    impl Visitor<'_> for V {
        type Value = f64;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or \"inf\"/\"-inf\"")
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
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("unexpected string {other:?}"))),
            }
        }
    }
    d.deserialize_any(V)
}

/// `#[serde(with = "crate::ext::ext_f64")]` for plain `f64` fields that may be infinite.
pub mod ext_f64 {
    pub use super::deserialize_f64 as deserialize;
    pub use super::serialize_f64 as serialize;
}

/// Same as [`ext_f64`] for `Option<f64>`.
pub mod opt_ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::serialize_f64(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "super::ext_f64")] f64);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}
