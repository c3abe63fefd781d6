use serde::{Deserialize, Serialize};

use crate::model::{AccountId, Roster, ScheduleId, ShiftId, TimeOffId, TimeOffState};
use crate::time::Interval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    OverlapSameSchedule,
    OverlapOtherSchedule,
    ExternalCalendarEvent,
    TimeOffOverlap,
    OutsideAvailability,
}

/// Why an account cannot take an interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub kind: ConflictKind,
    /// Human-readable description of the colliding source.
    pub other: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_off: Option<TimeOffId>,
}

/// Overlaps between `interval` and the account's other assignments.
/// `schedule` decides whether an overlap counts as same- or other-schedule.
pub fn assignment_overlaps(
    roster: &Roster,
    account: AccountId,
    schedule: ScheduleId,
    interval: &Interval,
    exclude: Option<ShiftId>,
) -> Vec<ConflictReport> {
    roster
        .assignments_of(account)
        .filter(|s| Some(s.id) != exclude && s.interval.overlaps(interval))
        .map(|s| {
            let kind = if s.schedule == schedule { ConflictKind::OverlapSameSchedule } else { ConflictKind::OverlapOtherSchedule };
            let schedule_name = roster.schedules.get(&s.schedule).map(|x| x.name.as_str()).unwrap_or("?");
            ConflictReport {
                kind,
                other: format!("{schedule_name} / {} ({})", s.title, s.interval),
                interval: Some(s.interval),
                shift: Some(s.id),
                time_off: None,
            }
        })
        .collect()
}

/// Every blocking conflict for placing `account` on `interval` in `schedule`.
pub fn conflicts_for(
    roster: &Roster,
    account: AccountId,
    schedule: ScheduleId,
    interval: &Interval,
    exclude: Option<ShiftId>,
) -> Vec<ConflictReport> {
    let mut out = assignment_overlaps(roster, account, schedule, interval, exclude);
    for t in roster.time_off.values() {
        if t.account == account && t.state == TimeOffState::Approved && t.interval.overlaps(interval) {
            out.push(ConflictReport {
                kind: ConflictKind::TimeOffOverlap,
                other: format!("time off: {} ({})", t.reason, t.interval),
                interval: Some(t.interval),
                shift: None,
                time_off: Some(t.id),
            });
        }
    }
    if let Some(events) = roster.external_events.get(&account) {
        out.extend(external_overlaps(events, interval));
    }
    if let Some(acc) = roster.accounts.get(&account) {
        if !acc.availability.covers(interval, roster.settings.display_zone) {
            out.push(ConflictReport {
                kind: ConflictKind::OutsideAvailability,
                other: "outside available hours".into(),
                interval: None,
                shift: None,
                time_off: None,
            });
        }
    }
    out
}

pub fn external_overlaps(events: &[crate::model::ExternalEvent], interval: &Interval) -> Vec<ConflictReport> {
    events
        .iter()
        .filter(|e| e.interval.overlaps(interval))
        .map(|e| ConflictReport {
            kind: ConflictKind::ExternalCalendarEvent,
            other: format!("{} [{}]", e.summary, e.uid),
            interval: Some(e.interval),
            shift: None,
            time_off: None,
        })
        .collect()
}

/// Whether the interval lies outside the opening hours in force on each of
/// its local days. Informational only.
pub fn outside_opening_hours(roster: &Roster, interval: &Interval) -> bool {
    let cal = &roster.opening_hours;
    if cal.is_empty() {
        return false;
    }
    crate::time::local_day_segments(interval, roster.settings.display_zone)
        .into_iter()
        .any(|(date, from, to)| !cal.ranges_on(date).iter().any(|r| r.start <= from && to <= r.end))
}
