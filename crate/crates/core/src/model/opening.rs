use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::{DateRange, MinuteRange};

/// A named stretch of the year with its own weekly opening grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningPeriod {
    pub name: String,
    pub range: DateRange,
    /// Index 0 is Monday.
    pub weekly: [Vec<MinuteRange>; 7],
}

/// Library opening hours. Informational only: nothing here blocks shift
/// creation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningHoursCalendar {
    #[serde(default)]
    pub periods: Vec<OpeningPeriod>,
    /// Per-date overrides; an empty list closes the day.
    #[serde(default)]
    pub exceptions: BTreeMap<NaiveDate, Vec<MinuteRange>>,
}

impl OpeningHoursCalendar {
    pub fn period_for(&self, date: NaiveDate) -> Option<&OpeningPeriod> {
        self.periods.iter().find(|p| p.range.contains(date))
    }

    /// Opening ranges in force on `date`, exceptions first.
    pub fn ranges_on(&self, date: NaiveDate) -> &[MinuteRange] {
        if let Some(ranges) = self.exceptions.get(&date) {
            return ranges;
        }
        match self.period_for(date) {
            Some(p) => &p.weekly[crate::time::weekday_index(chrono::Datelike::weekday(&date))],
            None => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty() && self.exceptions.is_empty()
    }
}
