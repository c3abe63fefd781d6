//! Opening-hours arithmetic and the time-off/assignment advisory.

use serde::Serialize;

use crate::model::{AccountId, OpeningHoursCalendar, Roster, ShiftId, TimeOffId, TimeOffState};
use crate::time::DateRange;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodMinutes {
    /// `None` collects dates outside every period (exceptions only).
    pub period: Option<String>,
    pub minutes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpenHours {
    pub total_minutes: u64,
    pub by_period: Vec<PeriodMinutes>,
}

/// Open minutes per date over `range`, with per-date exceptions taking
/// precedence over period grids.
pub fn annual_open_hours(calendar: &OpeningHoursCalendar, range: &DateRange) -> OpenHours {
    let mut by_period: Vec<PeriodMinutes> = calendar.periods.iter().map(|p| PeriodMinutes { period: Some(p.name.clone()), minutes: 0 }).collect();
    let mut outside = 0u64;
    let mut total = 0u64;
    for date in range.days() {
        let minutes: u64 = calendar.ranges_on(date).iter().map(|r| u64::from(r.minutes())).sum();
        total += minutes;
        match calendar.periods.iter().position(|p| p.range.contains(date)) {
            Some(i) => by_period[i].minutes += minutes,
            None => outside += minutes,
        }
    }
    if outside > 0 {
        by_period.push(PeriodMinutes { period: None, minutes: outside });
    }
    OpenHours { total_minutes: total, by_period }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct OverlapAdvisory {
    pub account: AccountId,
    pub shift: ShiftId,
    pub time_off: TimeOffId,
}

/// Every (account, shift, time-off) where an approved time-off overlaps a
/// shift the account is still assigned to. With a range, only shifts
/// overlapping it are considered.
pub fn timeoff_assignment_overlaps(roster: &Roster, range: Option<&DateRange>) -> Vec<OverlapAdvisory> {
    let window = range.map(|r| r.to_interval(roster.settings.display_zone));
    let mut out = Vec::new();
    for t in roster.time_off.values().filter(|t| t.state == TimeOffState::Approved) {
        for shift in roster.assignments_of(t.account) {
            if window.is_some_and(|w| !w.overlaps(&shift.interval)) {
                continue;
            }
            if shift.interval.overlaps(&t.interval) {
                out.push(OverlapAdvisory { account: t.account, shift: shift.id, time_off: t.id });
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OpeningPeriod;
    use crate::time::MinuteRange;

    fn weekdays(from: u16, to: u16) -> [Vec<MinuteRange>; 7] {
        let open = vec![MinuteRange::new(from, to).unwrap()];
        [open.clone(), open.clone(), open.clone(), open.clone(), open, vec![], vec![]]
    }

    #[test]
    fn one_week_and_a_holiday() {
        let mut cal = OpeningHoursCalendar::default();
        cal.periods.push(OpeningPeriod { name: "term".into(), range: "2021-09-01..2022-01-01".parse().unwrap(), weekly: weekdays(480, 1080) });
        let week: DateRange = "2021-09-06..2021-09-13".parse().unwrap();
        assert_eq!(annual_open_hours(&cal, &week).total_minutes, 3000);
        cal.exceptions.insert("2021-09-08".parse().unwrap(), vec![]);
        let hours = annual_open_hours(&cal, &week);
        assert_eq!(hours.total_minutes, 2400);
        assert_eq!(hours.by_period, vec![PeriodMinutes { period: Some("term".into()), minutes: 2400 }]);
    }

    #[test]
    fn exception_outside_periods_is_bucketed() {
        let mut cal = OpeningHoursCalendar::default();
        cal.exceptions.insert("2021-12-26".parse().unwrap(), vec![MinuteRange::new(600, 720).unwrap()]);
        let hours = annual_open_hours(&cal, &"2021-12-01..2022-01-01".parse().unwrap());
        assert_eq!(hours.total_minutes, 120);
        assert_eq!(hours.by_period, vec![PeriodMinutes { period: None, minutes: 120 }]);
    }
}
