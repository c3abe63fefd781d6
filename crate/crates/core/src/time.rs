//! Minute-resolution time primitives.
//!
//! Every instant in the system is a UTC timestamp truncated to the minute.
//! Intervals are half-open: `[start, end)`. Two intervals that merely touch
//! at a boundary do not overlap, which is what makes back-to-back shifts
//! legal.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, IsoWeek, LocalResult, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Timelike, Utc, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MINUTES_PER_DAY: u16 = 1440;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("timestamp {0} is not on a whole minute")]
    NotWholeMinute(String),
    #[error("interval is empty or reversed ({start} .. {end})")]
    EmptyInterval { start: String, end: String },
    #[error("date range is empty or reversed ({start} .. {end})")]
    EmptyRange { start: NaiveDate, end: NaiveDate },
    #[error("minute-of-day range {0}..{1} is invalid")]
    BadMinuteRange(u16, u16),
    #[error("cannot parse {0:?}")]
    Parse(String),
}

/// A UTC instant with minute resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn new(at: DateTime<Utc>) -> Result<Self, TimeError> {
        if at.second() != 0 || at.nanosecond() != 0 {
            return Err(TimeError::NotWholeMinute(at.to_rfc3339()));
        }
        Ok(Self(at))
    }

    /// Drops seconds and sub-seconds.
    pub fn truncate(at: DateTime<Utc>) -> Self {
        let secs = at.timestamp();
        Self(DateTime::from_timestamp(secs - secs.rem_euclid(60), 0).expect("in range"))
    }

    pub fn from_minutes(minutes_since_epoch: i64) -> Self {
        Self(DateTime::from_timestamp(minutes_since_epoch * 60, 0).expect("timestamp in range"))
    }

    /// Builds a timestamp from a local wall-clock date and time in `zone`.
    ///
    /// Ambiguous local times (DST fall-back) resolve to the earlier instant;
    /// nonexistent ones (spring-forward gap) are shifted forward by the gap.
    pub fn from_local(zone: Tz, date: NaiveDate, time: NaiveTime) -> Self {
        let naive = NaiveDateTime::new(date, time);
        let at = match zone.from_local_datetime(&naive) {
            LocalResult::Single(t) => t,
            LocalResult::Ambiguous(early, _) => early,
            LocalResult::None => {
                // skip over the gap
                let mut probe = naive;
                loop {
                    probe += Duration::minutes(1);
                    if let Some(t) = zone.from_local_datetime(&probe).earliest() {
                        break t;
                    }
                }
            }
        };
        Self::truncate(at.with_timezone(&Utc))
    }

    pub fn utc(&self) -> DateTime<Utc> {
        self.0
    }

    pub fn minutes_since_epoch(&self) -> i64 {
        self.0.timestamp().div_euclid(60)
    }

    pub fn local(&self, zone: Tz) -> DateTime<Tz> {
        self.0.with_timezone(&zone)
    }

    pub fn local_date(&self, zone: Tz) -> NaiveDate {
        self.local(zone).date_naive()
    }

    pub fn plus_minutes(&self, minutes: i64) -> Self {
        Self(self.0 + Duration::minutes(minutes))
    }

    /// `YYYYMMDDTHHMMSSZ`, the iCalendar UTC form.
    pub fn to_ical(&self) -> String {
        self.0.format("%Y%m%dT%H%M%SZ").to_string()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M:%SZ"))
    }
}

impl FromStr for Timestamp {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parsed = DateTime::parse_from_rfc3339(s).map_err(|_| TimeError::Parse(s.to_string()))?;
        Timestamp::new(parsed.with_timezone(&Utc))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Half-open `[start, end)` interval of minute timestamps, `start < end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Interval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Interval {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, TimeError> {
        if start >= end {
            return Err(TimeError::EmptyInterval { start: start.to_string(), end: end.to_string() });
        }
        Ok(Self { start, end })
    }

    pub fn minutes(&self) -> i64 {
        self.end.minutes_since_epoch() - self.start.minutes_since_epoch()
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, at: Timestamp) -> bool {
        self.start <= at && at < self.end
    }

    /// Length of the intersection in minutes, zero when disjoint.
    pub fn overlap_minutes(&self, other: &Interval) -> i64 {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (end.minutes_since_epoch() - start.minutes_since_epoch()).max(0)
    }

    /// Minutes strictly between the two intervals, zero when they touch or overlap.
    pub fn gap_minutes(&self, other: &Interval) -> i64 {
        if self.overlaps(other) {
            return 0;
        }
        if self.end <= other.start {
            other.start.minutes_since_epoch() - self.end.minutes_since_epoch()
        } else {
            self.start.minutes_since_epoch() - other.end.minutes_since_epoch()
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.start, self.end)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            start: Timestamp,
            end: Timestamp,
        }
        let raw = Raw::deserialize(deserializer)?;
        Interval::new(raw.start, raw.end).map_err(serde::de::Error::custom)
    }
}

/// Half-open range of calendar dates `[start, end)`, never empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, TimeError> {
        if start >= end {
            return Err(TimeError::EmptyRange { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date < self.end
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d < end)
    }

    /// The UTC interval covering local midnight of `start` to local midnight of `end`.
    pub fn to_interval(&self, zone: Tz) -> Interval {
        Interval {
            start: Timestamp::from_local(zone, self.start, NaiveTime::MIN),
            end: Timestamp::from_local(zone, self.end, NaiveTime::MIN),
        }
    }
}

impl FromStr for DateRange {
    type Err = TimeError;

    /// Parses `YYYY-MM-DD..YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once("..").ok_or_else(|| TimeError::Parse(s.to_string()))?;
        let parse = |d: &str| NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").map_err(|_| TimeError::Parse(d.to_string()));
        DateRange::new(parse(a)?, parse(b)?)
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl<'de> Deserialize<'de> for DateRange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            start: NaiveDate,
            end: NaiveDate,
        }
        let raw = Raw::deserialize(deserializer)?;
        DateRange::new(raw.start, raw.end).map_err(serde::de::Error::custom)
    }
}

/// Half-open range of minutes within a day, `0 <= start < end <= 1440`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MinuteRange {
    pub start: u16,
    pub end: u16,
}

impl MinuteRange {
    pub fn new(start: u16, end: u16) -> Result<Self, TimeError> {
        if start >= end || end > MINUTES_PER_DAY {
            return Err(TimeError::BadMinuteRange(start, end));
        }
        Ok(Self { start, end })
    }

    pub fn hm(start_h: u16, start_m: u16, end_h: u16, end_m: u16) -> Result<Self, TimeError> {
        Self::new(start_h * 60 + start_m, end_h * 60 + end_m)
    }

    pub fn minutes(&self) -> u32 {
        u32::from(self.end - self.start)
    }
}

impl<'de> Deserialize<'de> for MinuteRange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            start: u16,
            end: u16,
        }
        let raw = Raw::deserialize(deserializer)?;
        MinuteRange::new(raw.start, raw.end).map_err(serde::de::Error::custom)
    }
}

/// Sorts ranges and checks that none overlap.
pub fn normalize_ranges(ranges: &mut [MinuteRange]) -> Result<(), (MinuteRange, MinuteRange)> {
    ranges.sort();
    for pair in ranges.windows(2) {
        if pair[0].end > pair[1].start {
            return Err((pair[0], pair[1]));
        }
    }
    Ok(())
}

/// Splits an interval at local midnights, yielding `(date, minute-of-day range)` pieces.
pub fn local_day_segments(interval: &Interval, zone: Tz) -> Vec<(NaiveDate, u16, u16)> {
    let mut out = Vec::new();
    let mut cursor = interval.start;
    while cursor < interval.end {
        let local = cursor.local(zone);
        let date = local.date_naive();
        let next_midnight = Timestamp::from_local(zone, date.succ_opt().expect("date in range"), NaiveTime::MIN);
        let seg_end = next_midnight.min(interval.end);
        let from = minute_of_day(&local);
        let to = if seg_end == next_midnight { MINUTES_PER_DAY } else { minute_of_day(&seg_end.local(zone)) };
        if to > from {
            out.push((date, from, to));
        }
        cursor = seg_end;
    }
    out
}

fn minute_of_day(t: &DateTime<Tz>) -> u16 {
    (t.hour() * 60 + t.minute()) as u16
}

pub fn weekday_index(day: Weekday) -> usize {
    day.num_days_from_monday() as usize
}

/// ISO week label such as `2021-W36`.
pub fn iso_week_label(week: IsoWeek) -> String {
    format!("{:04}-W{:02}", week.year(), week.week())
}

/// Parses `YYYY-Www` into the Monday of that ISO week.
pub fn parse_iso_week(s: &str) -> Result<NaiveDate, TimeError> {
    let err = || TimeError::Parse(s.to_string());
    let (year, week) = s.split_once("-W").ok_or_else(err)?;
    let year: i32 = year.parse().map_err(|_| err())?;
    let week: u32 = week.parse().map_err(|_| err())?;
    NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).ok_or_else(err)
}

pub fn month_label(date: NaiveDate) -> String {
    format!("{:04}-{:02}", date.year(), date.month())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        s.parse().unwrap()
    }

    #[test]
    fn touching_intervals_do_not_overlap() {
        let a = Interval::new(ts("2021-09-06T09:00:00Z"), ts("2021-09-06T12:00:00Z")).unwrap();
        let b = Interval::new(ts("2021-09-06T12:00:00Z"), ts("2021-09-06T13:00:00Z")).unwrap();
        assert!(!a.overlaps(&b));
        assert_eq!(a.gap_minutes(&b), 0);
        assert_eq!(a.overlap_minutes(&b), 0);
    }

    #[test]
    fn seconds_are_rejected() {
        assert!(matches!("2021-09-06T09:00:30Z".parse::<Timestamp>(), Err(TimeError::NotWholeMinute(_))));
        assert!(Interval::new(ts("2021-09-06T09:00:00Z"), ts("2021-09-06T09:00:00Z")).is_err());
    }

    #[test]
    fn minute_precision_is_kept() {
        let a = Interval::new(ts("2021-09-06T09:07:00Z"), ts("2021-09-06T09:13:00Z")).unwrap();
        assert_eq!(a.minutes(), 6);
    }

    #[test]
    fn day_segments_split_at_local_midnight() {
        let zone: Tz = "Europe/Brussels".parse().unwrap();
        // 22:00 -> 02:00 local (UTC+2 in September)
        let i = Interval::new(ts("2021-09-06T20:00:00Z"), ts("2021-09-07T00:00:00Z")).unwrap();
        let segs = local_day_segments(&i, zone);
        assert_eq!(
            segs,
            vec![
                (NaiveDate::from_ymd_opt(2021, 9, 6).unwrap(), 22 * 60, 1440),
                (NaiveDate::from_ymd_opt(2021, 9, 7).unwrap(), 0, 120)
            ]
        );
    }

    #[test]
    fn iso_week_round_trip() {
        let monday = parse_iso_week("2021-W36").unwrap();
        assert_eq!(monday, NaiveDate::from_ymd_opt(2021, 9, 6).unwrap());
        assert_eq!(iso_week_label(monday.iso_week()), "2021-W36");
    }

    #[test]
    fn date_range_parse() {
        let r: DateRange = "2021-09-01..2021-10-27".parse().unwrap();
        assert_eq!(r.days().count(), 56);
        assert!("2021-10-27..2021-09-01".parse::<DateRange>().is_err());
    }
}
