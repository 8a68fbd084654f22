//! Timestamps, half-open periods and calendar periodicities.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, Months, NaiveDate, NaiveDateTime, TimeZone, Utc, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// Parses an ISO-8601 timestamp. Values without an offset are taken as UTC;
/// a date alone means midnight UTC.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| Utc.from_utc_datetime(&naive))
}

/// Canonical second-precision rendering, e.g. `1999-07-20T00:51:58Z`.
pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub(crate) mod serde_ts {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Timestamp;

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_timestamp(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {raw:?}")))
    }
}

/// A half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Period {
    #[serde(with = "serde_ts")]
    pub start: Timestamp,
    #[serde(with = "serde_ts")]
    pub end: Timestamp,
}

impl Period {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if start >= end {
            return Err(Error::invalid(format!(
                "inverted or empty interval [{}, {})",
                format_timestamp(&start),
                format_timestamp(&end)
            )));
        }
        Ok(Period { start, end })
    }

    /// Covers every representable timestamp the stores can hold.
    pub fn everything() -> Self {
        Period {
            start: Utc.with_ymd_and_hms(1, 1, 1, 0, 0, 0).unwrap(),
            end: Utc.with_ymd_and_hms(9999, 12, 31, 23, 59, 59).unwrap(),
        }
    }

    pub fn year(year: i32) -> Result<Self> {
        let start = Utc
            .with_ymd_and_hms(year, 1, 1, 0, 0, 0)
            .single()
            .ok_or_else(|| Error::invalid(format!("year {year} out of range")))?;
        Period::new(start, Periodicity::Year.advance(start))
    }

    pub fn contains(&self, ts: &Timestamp) -> bool {
        self.start <= *ts && *ts < self.end
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", format_timestamp(&self.start), format_timestamp(&self.end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Periodicity {
    Day,
    Week,
    Month,
    Year,
}

impl Periodicity {
    pub const ALL: [Periodicity; 4] = [Self::Day, Self::Week, Self::Month, Self::Year];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Day => "day",
            Self::Week => "week",
            Self::Month => "month",
            Self::Year => "year",
        }
    }

    /// Whether `ts` sits on a slot boundary. Weeks start on ISO Monday.
    pub fn is_aligned(self, ts: &Timestamp) -> bool {
        let midnight = ts.time() == chrono::NaiveTime::MIN;
        midnight
            && match self {
                Self::Day => true,
                Self::Week => ts.weekday() == Weekday::Mon,
                Self::Month => ts.day() == 1,
                Self::Year => ts.day() == 1 && ts.month() == 1,
            }
    }

    /// Start of the next slot. `ts` must be aligned.
    pub fn advance(self, ts: Timestamp) -> Timestamp {
        match self {
            Self::Day => ts + Duration::days(1),
            Self::Week => ts + Duration::weeks(1),
            Self::Month => ts + Months::new(1),
            Self::Year => ts + Months::new(12),
        }
    }

    /// Splits an aligned range into consecutive slots.
    pub fn slots(self, range: &Period) -> Result<Vec<Period>> {
        for ts in [&range.start, &range.end] {
            if !self.is_aligned(ts) {
                return Err(Error::invalid(format!(
                    "{} is not aligned to a {} boundary",
                    format_timestamp(ts),
                    self.as_str()
                )));
            }
        }
        let mut slots = Vec::new();
        let mut cursor = range.start;
        while cursor < range.end {
            let next = self.advance(cursor);
            slots.push(Period { start: cursor, end: next });
            cursor = next;
        }
        Ok(slots)
    }
}

impl fmt::Display for Periodicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Periodicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown periodicity {s:?}")))
    }
}
