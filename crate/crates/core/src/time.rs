//! Millisecond timestamps and time ranges.
//!
//! All media time is held as integer milliseconds so that cut arithmetic is
//! lossless. On the wire a timestamp is the string `HH:MM:SS.mmm`; model
//! output may also use a bare number of seconds, which is accepted on input
//! and normalized on output.

use std::borrow::Cow;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use schemars::{json_schema, JsonSchema, Schema, SchemaGenerator};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A point (or a length) on a media timeline, in whole milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_millis(ms: u64) -> Self {
        Self(ms)
    }

    pub const fn from_secs(s: u64) -> Self {
        Self(s * 1000)
    }

    /// Rounds to the nearest millisecond. Negative and non-finite inputs are
    /// rejected.
    pub fn from_secs_f64(s: f64) -> Result<Self> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Precondition(format!("invalid time value {s}")));
        }
        Ok(Self((s * 1000.0).round() as u64))
    }

    pub const fn as_millis(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn abs_diff(self, other: Timestamp) -> Timestamp {
        Timestamp(self.0.abs_diff(other.0))
    }

    pub fn saturating_sub(self, other: Timestamp) -> Timestamp {
        Timestamp(self.0.saturating_sub(other.0))
    }

    /// Multiplies a length by a rational factor, rounding to the nearest ms.
    pub fn scale(self, num: u64, den: u64) -> Timestamp {
        Timestamp((self.0 * num + den / 2) / den)
    }
}

impl Add for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Timestamp) -> Timestamp {
        Timestamp(self.0 + rhs.0)
    }
}

impl Sub for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: Timestamp) -> Timestamp {
        Timestamp(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Timestamp {
    fn sum<I: Iterator<Item = Timestamp>>(iter: I) -> Timestamp {
        Timestamp(iter.map(|t| t.0).sum())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % 1000;
        let total_s = self.0 / 1000;
        let (h, m, s) = (total_s / 3600, (total_s / 60) % 60, total_s % 60);
        write!(f, "{h:02}:{m:02}:{s:02}.{ms:03}")
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    /// Accepts `HH:MM:SS.mmm`, `MM:SS(.mmm)` or a plain decimal number of seconds.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Precondition(format!("unparseable timestamp {s:?}"));
        if !s.contains(':') {
            let secs: f64 = s.parse().map_err(|_| bad())?;
            return Timestamp::from_secs_f64(secs);
        }
        let parts: Vec<&str> = s.split(':').collect();
        let (h, m, sec) = match parts.as_slice() {
            [h, m, sec] => (*h, *m, *sec),
            [m, sec] => ("0", *m, *sec),
            _ => return Err(bad()),
        };
        let h: u64 = h.parse().map_err(|_| bad())?;
        let m: u64 = m.parse().map_err(|_| bad())?;
        if m >= 60 {
            return Err(bad());
        }
        let (whole, frac) = sec.split_once('.').unwrap_or((sec, ""));
        let whole: u64 = whole.parse().map_err(|_| bad())?;
        if whole >= 60 || frac.len() > 3 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let ms = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<3}").parse::<u64>().map_err(|_| bad())?
        };
        Ok(Timestamp(((h * 60 + m) * 60 + whole) * 1000 + ms))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TsVisitor;

        impl Visitor<'_> for TsVisitor {
            type Value = Timestamp;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a timestamp string HH:MM:SS.mmm or a number of seconds")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Timestamp, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Timestamp, E> {
                Ok(Timestamp::from_secs(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Timestamp, E> {
                u64::try_from(v)
                    .map(Timestamp::from_secs)
                    .map_err(|_| E::custom("negative timestamp"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Timestamp, E> {
                Timestamp::from_secs_f64(v).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(TsVisitor)
    }
}

impl JsonSchema for Timestamp {
    fn schema_name() -> Cow<'static, str> {
        "Timestamp".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        json_schema!({
            "type": "string",
            "pattern": "^[0-9]{2,}:[0-5][0-9]:[0-5][0-9]\\.[0-9]{3}$",
            "description": "Media time as HH:MM:SS.mmm"
        })
    }
}

/// Half-open span `[start, end)` on a media timeline.
///
/// Deserialization does not enforce `start < end`; artifact validation reports
/// inverted ranges instead so that a bad artifact can still be inspected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub struct TimeRange {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeRange {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if start >= end {
            return Err(Error::Precondition(format!(
                "time range start {start} must precede end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    /// Whole-second constructor used heavily in fixtures.
    pub fn secs(start: u64, end: u64) -> Self {
        Self::new(Timestamp::from_secs(start), Timestamp::from_secs(end))
            .expect("start < end")
    }

    pub fn millis(start: u64, end: u64) -> Self {
        Self::new(Timestamp::from_millis(start), Timestamp::from_millis(end))
            .expect("start < end")
    }

    pub fn is_well_formed(&self) -> bool {
        self.start < self.end
    }

    pub fn len(&self) -> Timestamp {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn contains_range(&self, other: &TimeRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &TimeRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when `t` lies strictly between the endpoints.
    pub fn strictly_contains(&self, t: Timestamp) -> bool {
        self.start < t && t < self.end
    }
}

impl fmt::Display for TimeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}
