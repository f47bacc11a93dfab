//! Partial, possibly ranged historical dates and their packed sort keys.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DateError {
    #[error("year 0 does not exist in historical numbering")]
    YearZero,
    #[error("month {0} out of range 1-12")]
    Month(u8),
    #[error("day {day} out of range for month {month} of year {year}")]
    Day { year: i32, month: u8, day: u8 },
    #[error("day given without a month")]
    DayWithoutMonth,
    #[error("range end given without a range start")]
    EndWithoutStart,
    #[error("range ends before it starts")]
    EndBeforeStart,
    #[error("malformed date key {0:?}")]
    MalformedKey(String),
}

/// How precisely an event's date is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
    Day,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Year => "year",
            Granularity::Month => "month",
            Granularity::Day => "day",
        }
    }
}

/// A date in historical numbering: negative years are BCE and there is no
/// year 0. Month and day may be missing; a range end, when present, lies in
/// the same year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDate", into = "RawDate")]
pub struct HistoricalDate {
    year: i32,
    month: Option<u8>,
    day: Option<u8>,
    end_month: Option<u8>,
    end_day: Option<u8>,
}

#[derive(Serialize, Deserialize)]
struct RawDate {
    year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    month: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    day: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_month: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_day: Option<u8>,
}

impl TryFrom<RawDate> for HistoricalDate {
    type Error = DateError;

    fn try_from(r: RawDate) -> Result<Self, Self::Error> {
        HistoricalDate::new(r.year, r.month, r.day, r.end_month, r.end_day)
    }
}

impl From<HistoricalDate> for RawDate {
    fn from(d: HistoricalDate) -> Self {
        RawDate {
            year: d.year,
            month: d.month,
            day: d.day,
            end_month: d.end_month,
            end_day: d.end_day,
        }
    }
}

/// Proleptic Gregorian leap rule. BCE years are shifted to astronomical
/// numbering first, so 1 BC (astronomical year 0) is a leap year.
pub fn is_leap_year(year: i32) -> bool {
    let astro = if year < 0 { year + 1 } else { year };
    astro.rem_euclid(4) == 0 && (astro.rem_euclid(100) != 0 || astro.rem_euclid(400) == 0)
}

pub fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl HistoricalDate {
    pub fn new(
        year: i32,
        month: Option<u8>,
        day: Option<u8>,
        end_month: Option<u8>,
        end_day: Option<u8>,
    ) -> Result<Self, DateError> {
        if year == 0 {
            return Err(DateError::YearZero);
        }
        for m in [month, end_month].into_iter().flatten() {
            if !(1..=12).contains(&m) {
                return Err(DateError::Month(m));
            }
        }
        if day.is_some() && month.is_none() {
            return Err(DateError::DayWithoutMonth);
        }
        if end_month.is_some() && month.is_none() {
            return Err(DateError::EndWithoutStart);
        }
        if end_day.is_some() && (day.is_none() || end_month.is_none()) {
            return Err(DateError::EndWithoutStart);
        }
        for (m, d) in [(month, day), (end_month, end_day)] {
            if let (Some(m), Some(d)) = (m, d) {
                if d == 0 || d > days_in_month(year, m) {
                    return Err(DateError::Day { year, month: m, day: d });
                }
            }
        }
        if let (Some(m), Some(em)) = (month, end_month) {
            if (em, end_day.unwrap_or(0)) < (m, day.unwrap_or(0)) {
                return Err(DateError::EndBeforeStart);
            }
        }
        Ok(HistoricalDate { year, month, day, end_month, end_day })
    }

    pub fn year_only(year: i32) -> Result<Self, DateError> {
        Self::new(year, None, None, None, None)
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> Option<u8> {
        self.month
    }

    pub fn day(&self) -> Option<u8> {
        self.day
    }

    pub fn end_month(&self) -> Option<u8> {
        self.end_month
    }

    pub fn end_day(&self) -> Option<u8> {
        self.end_day
    }

    pub fn is_range(&self) -> bool {
        self.end_month.is_some()
    }

    pub fn granularity(&self) -> Granularity {
        match (self.month, self.day) {
            (_, Some(_)) => Granularity::Day,
            (Some(_), None) => Granularity::Month,
            _ => Granularity::Year,
        }
    }

    pub fn key(&self) -> DateKey {
        DateKey::from_parts(self.year, self.month.unwrap_or(0), self.day.unwrap_or(0))
    }

    /// Lexical form used by the XML export and the gold files: `YYYY[-MM[-DD]]`
    /// with a leading `-` for BCE years (historical numbering, no shift), and
    /// `/end` appended for ranges.
    pub fn to_lexical(&self) -> String {
        let mut s = fmt_point(self.year, self.month, self.day);
        if let Some(em) = self.end_month {
            s.push('/');
            s.push_str(&fmt_point(self.year, Some(em), self.end_day));
        }
        s
    }
}

fn fmt_point(year: i32, month: Option<u8>, day: Option<u8>) -> String {
    let mut s = if year < 0 {
        format!("-{:04}", -(year as i64))
    } else {
        format!("{:04}", year)
    };
    if let Some(m) = month {
        s.push_str(&format!("-{:02}", m));
        if let Some(d) = day {
            s.push_str(&format!("-{:02}", d));
        }
    }
    s
}

impl fmt::Display for HistoricalDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_lexical())
    }
}

impl FromStr for HistoricalDate {
    type Err = DateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DateError::MalformedKey(s.to_string());
        let (start, end) = match s.split_once('/') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let parse_point = |p: &str| -> Result<(i32, Option<u8>, Option<u8>), DateError> {
            let (neg, body) = match p.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, p),
            };
            let mut parts = body.split('-');
            let y: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let m = parts.next().map(|v| v.parse::<u8>().map_err(|_| bad())).transpose()?;
            let d = parts.next().map(|v| v.parse::<u8>().map_err(|_| bad())).transpose()?;
            if parts.next().is_some() {
                return Err(bad());
            }
            Ok((if neg { -y } else { y }, m, d))
        };
        let (year, month, day) = parse_point(start)?;
        let (end_month, end_day) = match end {
            Some(e) => {
                let (ey, em, ed) = parse_point(e)?;
                if ey != year {
                    return Err(DateError::EndBeforeStart);
                }
                (em, ed)
            }
            None => (None, None),
        };
        HistoricalDate::new(year, month, day, end_month, end_day)
    }
}

/// Packed chronological sort key. CE dates pack as `YYYYMMDD` with zeros for
/// unknown parts. BCE dates pack as `-(|year| * 10^4) + MMDD`, which keeps
/// the months of a BCE year in chronological order while every BCE key stays
/// below every later year's keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DateKey(i64);

impl DateKey {
    pub const MIN: DateKey = DateKey(i64::MIN);
    pub const MAX: DateKey = DateKey(i64::MAX);

    pub fn from_parts(year: i32, month: u8, day: u8) -> DateKey {
        DateKey(year as i64 * 10_000 + month as i64 * 100 + day as i64)
    }

    pub fn value(self) -> i64 {
        self.0
    }

    /// Inverse of [`DateKey::from_parts`].
    pub fn parts(self) -> (i32, u8, u8) {
        let y = self.0.div_euclid(10_000);
        let md = self.0.rem_euclid(10_000);
        (y as i32, (md / 100) as u8, (md % 100) as u8)
    }

    /// Parses the query-parameter form: eight zero-padded digits `YYYYMMDD`,
    /// optionally prefixed with `-` for BCE years. Month and day may be `00`.
    pub fn parse_param(s: &str) -> Result<DateKey, DateError> {
        let bad = || DateError::MalformedKey(s.to_string());
        let (neg, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        if digits.len() != 8 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let year: i32 = digits[..4].parse().map_err(|_| bad())?;
        let month: u8 = digits[4..6].parse().map_err(|_| bad())?;
        let day: u8 = digits[6..8].parse().map_err(|_| bad())?;
        if year == 0 {
            return Err(DateError::YearZero);
        }
        if month > 12 {
            return Err(DateError::Month(month));
        }
        if day > 31 || (month == 0 && day != 0) {
            return Err(bad());
        }
        Ok(DateKey::from_parts(if neg { -year } else { year }, month, day))
    }

    pub fn to_param(self) -> String {
        let (y, m, d) = self.parts();
        if y < 0 {
            format!("-{:04}{:02}{:02}", -y, m, d)
        } else {
            format!("{:04}{:02}{:02}", y, m, d)
        }
    }
}

impl PartialOrd for HistoricalDate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HistoricalDate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key()
            .cmp(&other.key())
            .then_with(|| self.end_month.cmp(&other.end_month))
            .then_with(|| self.end_day.cmp(&other.end_day))
    }
}
