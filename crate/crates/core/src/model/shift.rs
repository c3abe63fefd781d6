use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::ids::{AccountId, PositionId, ScheduleId, ShiftId};
use crate::time::Interval;

/// Repeats a shift on the listed weekdays up to and including `until`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeeklyRecurrence {
    pub weekdays: BTreeSet<WeekdayName>,
    pub until: NaiveDate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeekdayName {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl From<Weekday> for WeekdayName {
    fn from(day: Weekday) -> Self {
        match day {
            Weekday::Mon => WeekdayName::Mon,
            Weekday::Tue => WeekdayName::Tue,
            Weekday::Wed => WeekdayName::Wed,
            Weekday::Thu => WeekdayName::Thu,
            Weekday::Fri => WeekdayName::Fri,
            Weekday::Sat => WeekdayName::Sat,
            Weekday::Sun => WeekdayName::Sun,
        }
    }
}

impl WeeklyRecurrence {
    pub fn matches(&self, date: NaiveDate) -> bool {
        date <= self.until && self.weekdays.contains(&WeekdayName::from(date.weekday()))
    }
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shift {
    pub id: ShiftId,
    pub schedule: ScheduleId,
    pub title: String,
    pub interval: Interval,
    #[serde(default = "one")]
    pub min_staff: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_staff: Option<u32>,
    /// Empty means anyone in the schedule may fill it.
    #[serde(default)]
    pub required_positions: BTreeSet<PositionId>,
    #[serde(default)]
    pub favorites: BTreeSet<AccountId>,
    #[serde(default)]
    pub assignments: BTreeSet<AccountId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<WeeklyRecurrence>,
    /// First occurrence of the series this shift was expanded from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<ShiftId>,
    #[serde(default)]
    pub work_from_home: bool,
}

impl Shift {
    pub fn new(id: ShiftId, schedule: ScheduleId, title: &str, interval: Interval) -> Self {
        Self {
            id,
            schedule,
            title: title.to_string(),
            interval,
            min_staff: 1,
            max_staff: None,
            required_positions: BTreeSet::new(),
            favorites: BTreeSet::new(),
            assignments: BTreeSet::new(),
            recurrence: None,
            series: None,
            work_from_home: false,
        }
    }

    /// Fewer assignees than the minimum. Time-off of assignees is ignored.
    pub fn is_understaffed(&self) -> bool {
        (self.assignments.len() as u64) < u64::from(self.min_staff)
    }

    pub fn is_full(&self) -> bool {
        self.max_staff.is_some_and(|max| self.assignments.len() as u64 >= u64::from(max))
    }

    pub fn open_slots(&self) -> u32 {
        let missing = self.min_staff.saturating_sub(self.assignments.len() as u32);
        match self.max_staff {
            Some(max) => missing.min(max.saturating_sub(self.assignments.len() as u32)),
            None => missing,
        }
    }
}
