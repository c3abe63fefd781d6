use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::Datelike;
use chrono_tz::Tz;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ids::{AccountId, DepartmentId, LocationId, PositionId};
use crate::time::{local_day_segments, weekday_index, Interval, MinuteRange};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Admin,
    #[default]
    Regular,
}

/// `#RRGGBB`, stored upper-case.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Color(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed color {0:?}, expected #RRGGBB")]
pub struct MalformedColor(pub String);

impl Color {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Color {
    type Err = MalformedColor;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').ok_or_else(|| MalformedColor(s.to_string()))?;
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(MalformedColor(s.to_string()));
        }
        Ok(Color(format!("#{}", hex.to_ascii_uppercase())))
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Color {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// The six per-agent limits. Durations are in minutes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuotaSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_consecutive_hours: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_consecutive_days: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hours_per_day: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_hours_per_week: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hours_per_week: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hours_per_month: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaKind {
    MaxConsecutiveHours,
    MaxConsecutiveDays,
    MaxHoursPerDay,
    MinHoursPerWeek,
    MaxHoursPerWeek,
    MaxHoursPerMonth,
}

impl QuotaKind {
    pub const ALL: [QuotaKind; 6] = [
        QuotaKind::MaxConsecutiveHours,
        QuotaKind::MaxConsecutiveDays,
        QuotaKind::MaxHoursPerDay,
        QuotaKind::MinHoursPerWeek,
        QuotaKind::MaxHoursPerWeek,
        QuotaKind::MaxHoursPerMonth,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QuotaKind::MaxConsecutiveHours => "max_consecutive_hours",
            QuotaKind::MaxConsecutiveDays => "max_consecutive_days",
            QuotaKind::MaxHoursPerDay => "max_hours_per_day",
            QuotaKind::MinHoursPerWeek => "min_hours_per_week",
            QuotaKind::MaxHoursPerWeek => "max_hours_per_week",
            QuotaKind::MaxHoursPerMonth => "max_hours_per_month",
        }
    }
}

impl QuotaSet {
    pub fn get(&self, kind: QuotaKind) -> Option<u32> {
        match kind {
            QuotaKind::MaxConsecutiveHours => self.max_consecutive_hours,
            QuotaKind::MaxConsecutiveDays => self.max_consecutive_days,
            QuotaKind::MaxHoursPerDay => self.max_hours_per_day,
            QuotaKind::MinHoursPerWeek => self.min_hours_per_week,
            QuotaKind::MaxHoursPerWeek => self.max_hours_per_week,
            QuotaKind::MaxHoursPerMonth => self.max_hours_per_month,
        }
    }

    pub fn set(&mut self, kind: QuotaKind, value: Option<u32>) {
        let slot = match kind {
            QuotaKind::MaxConsecutiveHours => &mut self.max_consecutive_hours,
            QuotaKind::MaxConsecutiveDays => &mut self.max_consecutive_days,
            QuotaKind::MaxHoursPerDay => &mut self.max_hours_per_day,
            QuotaKind::MinHoursPerWeek => &mut self.min_hours_per_week,
            QuotaKind::MaxHoursPerWeek => &mut self.max_hours_per_week,
            QuotaKind::MaxHoursPerMonth => &mut self.max_hours_per_month,
        };
        *slot = value;
    }

    pub fn is_empty(&self) -> bool {
        QuotaKind::ALL.iter().all(|k| self.get(*k).is_none())
    }
}

/// Hourly rates in minor currency units (cents per hour).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PayRates {
    pub regular_rate: i64,
    pub overtime_rate: i64,
    /// Minutes per ISO week paid at the regular rate.
    pub weekly_overtime_threshold: u32,
}

/// Weekly availability. `None` means available at all times; otherwise
/// index 0 is Monday and each day lists the allowed minute ranges (an empty
/// day is fully unavailable).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AvailabilityGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weekly: Option<[Vec<MinuteRange>; 7]>,
}

impl AvailabilityGrid {
    pub fn always() -> Self {
        Self { weekly: None }
    }

    pub fn weekly(days: [Vec<MinuteRange>; 7]) -> Self {
        Self { weekly: Some(days) }
    }

    /// Whether every local minute of `interval` falls inside an allowed range.
    pub fn covers(&self, interval: &Interval, zone: Tz) -> bool {
        let Some(days) = &self.weekly else {
            return true;
        };
        local_day_segments(interval, zone).into_iter().all(|(date, from, to)| {
            let ranges = &days[weekday_index(date.weekday())];
            covered_by(ranges, from, to)
        })
    }
}

/// `ranges` must be sorted and non-overlapping; adjacent ranges chain.
fn covered_by(ranges: &[MinuteRange], from: u16, to: u16) -> bool {
    let mut reach = from;
    for r in ranges {
        if r.start > reach {
            break;
        }
        if r.end > reach {
            reach = r.end;
        }
        if reach >= to {
            return true;
        }
    }
    reach >= to
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    pub given_name: String,
    pub family_name: String,
    pub email: String,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub positions: BTreeSet<PositionId>,
    #[serde(default)]
    pub departments: BTreeSet<DepartmentId>,
    #[serde(default)]
    pub locations: BTreeSet<LocationId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    #[serde(default)]
    pub quotas: QuotaSet,
    #[serde(default)]
    pub availability: AvailabilityGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pay: Option<PayRates>,
    #[serde(default)]
    pub anonymized: bool,
}

impl Account {
    pub fn new(id: AccountId, given_name: &str, family_name: &str, email: &str) -> Self {
        Self {
            id,
            given_name: given_name.to_string(),
            family_name: family_name.to_string(),
            email: email.to_string(),
            role: Role::Regular,
            positions: BTreeSet::new(),
            departments: BTreeSet::new(),
            locations: BTreeSet::new(),
            color: None,
            quotas: QuotaSet::default(),
            availability: AvailabilityGrid::always(),
            pay: None,
            anonymized: false,
        }
    }

    pub fn display_name(&self) -> String {
        if self.anonymized {
            self.given_name.clone()
        } else {
            format!("{} {}", self.given_name, self.family_name)
        }
    }

    pub fn is_admin(&self) -> bool {
        self.role == Role::Admin && !self.anonymized
    }
}
