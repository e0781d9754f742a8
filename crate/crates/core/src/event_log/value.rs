use std::cmp::Ordering;
use std::fmt;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, SubsecRound, Utc};
use serde::{Serialize, Serializer};

use crate::pyfmt;

pub type Timestamp = DateTime<Utc>;

/// A single attribute value. `Missing` is distinct from the empty string.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Text(String),
    Int(i64),
    Real(f64),
    Timestamp(Timestamp),
    Bool(bool),
    Missing,
}

impl AttributeValue {
    pub fn kind(&self) -> Option<AttributeKind> {
        Some(match self {
            Self::Text(_) => AttributeKind::Text,
            Self::Int(_) => AttributeKind::Integer,
            Self::Real(_) => AttributeKind::Real,
            Self::Timestamp(_) => AttributeKind::Timestamp,
            Self::Bool(_) => AttributeKind::Boolean,
            Self::Missing => return None,
        })
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Self::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Self::Int(i) => Some(i as f64),
            Self::Real(r) => Some(r),
            _ => None,
        }
    }

    /// Total order used for sorting and grouping: missing sorts last, then values by kind.
    /// Integers and reals compare numerically.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        use AttributeValue::*;
        fn rank(v: &AttributeValue) -> u8 {
            match v {
                Bool(_) => 0,
                Int(_) | Real(_) => 1,
                Timestamp(_) => 2,
                Text(_) => 3,
                Missing => 4,
            }
        }
        match (self, other) {
            (Bool(a), Bool(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Int(_) | Real(_), Int(_) | Real(_)) => {
                let (a, b) = (self.as_f64().unwrap(), other.as_f64().unwrap());
                a.total_cmp(&b)
            }
            (Timestamp(a), Timestamp(b)) => a.cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Text(s) => f.write_str(s),
            Self::Int(i) => write!(f, "{i}"),
            Self::Real(r) => f.write_str(&pyfmt::float_repr(*r)),
            Self::Timestamp(t) => f.write_str(&format_timestamp(*t)),
            Self::Bool(b) => write!(f, "{b}"),
            Self::Missing => f.write_str("NULL"),
        }
    }
}

impl Serialize for AttributeValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Text(v) => s.serialize_str(v),
            Self::Int(v) => s.serialize_i64(*v),
            Self::Real(v) => s.serialize_f64(*v),
            Self::Timestamp(t) => s.serialize_str(&format_timestamp(*t)),
            Self::Bool(b) => s.serialize_bool(*b),
            Self::Missing => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Text,
    Integer,
    Real,
    Timestamp,
    Boolean,
}

impl AttributeKind {
    /// Column type after observing values of both kinds. Integers widen to reals, anything
    /// else mixed degrades to text.
    pub fn merge(self, other: Self) -> Self {
        use AttributeKind::*;
        match (self, other) {
            (a, b) if a == b => a,
            (Integer, Real) | (Real, Integer) => Real,
            _ => Text,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Self::Integer | Self::Real)
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Text => "text",
            Self::Integer => "integer",
            Self::Real => "real",
            Self::Timestamp => "timestamp",
            Self::Boolean => "boolean",
        })
    }
}

pub(crate) fn truncate_to_micros(t: Timestamp) -> Timestamp {
    t.trunc_subsecs(6)
}

/// ISO-8601 with explicit offset, microseconds only when non-zero.
pub fn format_timestamp(t: Timestamp) -> String {
    if t.timestamp_subsec_micros() == 0 {
        t.format("%Y-%m-%dT%H:%M:%S%:z").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S%.6f%:z").to_string()
    }
}

const OFFSET_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%z"];
const NAIVE_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"];

/// Parses an ISO-8601 timestamp. Values without an offset are read as UTC when `assume_utc`
/// is set and rejected otherwise.
pub fn parse_timestamp(text: &str, assume_utc: bool) -> Option<Timestamp> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(truncate_to_micros(t.with_timezone(&Utc)));
    }
    for fmt in OFFSET_FORMATS {
        if let Ok(t) = DateTime::<FixedOffset>::parse_from_str(text, fmt) {
            return Some(truncate_to_micros(t.with_timezone(&Utc)));
        }
    }
    if !assume_utc {
        return None;
    }
    let text = text.strip_suffix('Z').unwrap_or(text);
    for fmt in NAIVE_FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(truncate_to_micros(t.and_utc()));
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(|t| t.and_utc())
}

/// Parses a timestamp with an explicit strftime format.
pub(crate) fn parse_timestamp_with(text: &str, format: &str, assume_utc: bool) -> Option<Timestamp> {
    let text = text.trim();
    if let Ok(t) = DateTime::<FixedOffset>::parse_from_str(text, format) {
        return Some(truncate_to_micros(t.with_timezone(&Utc)));
    }
    if !assume_utc {
        return None;
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(text, format) {
        return Some(truncate_to_micros(t.and_utc()));
    }
    NaiveDate::parse_from_str(text, format).ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(|t| t.and_utc())
}
