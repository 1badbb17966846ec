use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An integer extended with an absorbing negative-infinity sentinel.
///
/// `NegInf` marks infeasible bundles. It sorts below every finite value and
/// swallows any finite summand, so infeasibility never leaks into finite
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    NegInf,
    Finite(i64),
}

impl Value {
    pub const ZERO: Value = Value::Finite(0);

    pub fn finite(self) -> Option<i64> {
        match self {
            Value::Finite(v) => Some(v),
            Value::NegInf => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Value::Finite(_))
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Finite(v)
    }
}

impl Add for Value {
    type Output = Value;
    fn add(self, rhs: Value) -> Value {
        match (self, rhs) {
            (Value::Finite(a), Value::Finite(b)) => Value::Finite(a + b),
            _ => Value::NegInf,
        }
    }
}

impl Add<i64> for Value {
    type Output = Value;
    fn add(self, rhs: i64) -> Value {
        match self {
            Value::Finite(a) => Value::Finite(a + rhs),
            Value::NegInf => Value::NegInf,
        }
    }
}

impl Sub<i64> for Value {
    type Output = Value;
    fn sub(self, rhs: i64) -> Value {
        match self {
            Value::Finite(a) => Value::Finite(a - rhs),
            Value::NegInf => Value::NegInf,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Finite(v) => write!(f, "{v}"),
            Value::NegInf => f.write_str("-inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseValueError(String);

impl fmt::Display for ParseValueError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected an integer or \"-inf\", got {:?}", self.0)
    }
}

impl std::error::Error for ParseValueError {}

impl FromStr for Value {
    type Err = ParseValueError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("-inf") {
            return Ok(Value::NegInf);
        }
        t.parse::<i64>()
            .map(Value::Finite)
            .map_err(|_| ParseValueError(s.to_string()))
    }
}

// Finite values serialize as plain integers, the sentinel as the string "-inf".
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Finite(v) => serializer.serialize_i64(*v),
            Value::NegInf => serializer.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValueVisitor;

        impl Visitor<'_> for ValueVisitor {
            type Value = Value;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or the string \"-inf\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Value, E> {
                Ok(Value::Finite(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Value, E> {
                i64::try_from(v)
                    .map(Value::Finite)
                    .map_err(|_| E::custom("integer out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Value, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ValueVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neg_inf_is_absorbing_and_smallest() {
        assert_eq!(Value::NegInf + 5, Value::NegInf);
        assert_eq!(Value::Finite(3) + Value::NegInf, Value::NegInf);
        assert!(Value::NegInf < Value::Finite(i64::MIN));
        assert!(Value::Finite(-1) < Value::Finite(0));
    }

    #[test]
    fn parses_text_forms() {
        assert_eq!("-inf".parse::<Value>().unwrap(), Value::NegInf);
        assert_eq!(" 12 ".parse::<Value>().unwrap(), Value::Finite(12));
        assert!("inf".parse::<Value>().is_err());
    }
}
