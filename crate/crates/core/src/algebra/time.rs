use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Failure instant on the extended non-negative reals. `+inf` is `NEVER`.
#[derive(Clone, Copy, PartialEq)]
pub struct FailureTime(f64);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("failure time must be a non-negative number or +inf, got {0}")]
pub struct InvalidTime(pub f64);

impl FailureTime {
    pub const ALWAYS: FailureTime = FailureTime(0.0);
    pub const NEVER: FailureTime = FailureTime(f64::INFINITY);

    pub fn new(t: f64) -> Result<Self, InvalidTime> {
        if t.is_nan() || t < 0.0 {
            Err(InvalidTime(t))
        } else {
            // -0.0 and 0.0 must compare equal under total_cmp.
            Ok(FailureTime(if t == 0.0 { 0.0 } else { t }))
        }
    }

    /// Panics on negative or NaN input.
    pub fn at(t: f64) -> Self {
        Self::new(t).expect("valid failure time")
    }

    pub fn is_never(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn is_finite(self) -> bool {
        !self.is_never()
    }

    /// `None` for `NEVER`.
    pub fn finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    pub fn as_f64(self) -> f64 {
        self.0
    }
}

impl Eq for FailureTime {}

impl PartialOrd for FailureTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FailureTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Debug for FailureTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for FailureTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_never() {
            write!(f, "NEVER")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for FailureTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.finite() {
            Some(t) => s.serialize_f64(t),
            None => s.serialize_str("NEVER"),
        }
    }
}

impl<'de> Deserialize<'de> for FailureTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(t) => FailureTime::new(t).map_err(serde::de::Error::custom),
            Repr::Word(w) if w == "NEVER" => Ok(FailureTime::NEVER),
            Repr::Word(w) if w == "ALWAYS" => Ok(FailureTime::ALWAYS),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("bad failure time `{w}`"))),
        }
    }
}
