use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::assign::{check_assignment, holds_required_position};
use super::conflicts::outside_opening_hours;
use super::EngineError;
use crate::model::{AccountId, PositionId, RequestState, Roster, ScheduleId, Shift, ShiftId, WeeklyRecurrence};
use crate::rights;
use crate::time::{Interval, Timestamp};

/// Longest span a weekly recurrence may cover, in days.
pub const MAX_RECURRENCE_DAYS: i64 = 366;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftDraft {
    pub schedule: ScheduleId,
    pub title: String,
    pub interval: Interval,
    #[serde(default = "one")]
    pub min_staff: u32,
    #[serde(default)]
    pub max_staff: Option<u32>,
    #[serde(default)]
    pub required_positions: BTreeSet<PositionId>,
    #[serde(default)]
    pub favorites: BTreeSet<AccountId>,
    /// Accounts to place on every occurrence.
    #[serde(default)]
    pub assignments: BTreeSet<AccountId>,
    #[serde(default)]
    pub recurrence: Option<WeeklyRecurrence>,
    #[serde(default)]
    pub work_from_home: bool,
    /// Overrides conflicts and quotas on the first occurrence only.
    #[serde(default)]
    pub force: bool,
}

fn one() -> u32 {
    1
}

impl ShiftDraft {
    pub fn new(schedule: ScheduleId, title: &str, interval: Interval) -> Self {
        Self {
            schedule,
            title: title.to_string(),
            interval,
            min_staff: 1,
            max_staff: None,
            required_positions: BTreeSet::new(),
            favorites: BTreeSet::new(),
            assignments: BTreeSet::new(),
            recurrence: None,
            work_from_home: false,
            force: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefusedAssignment {
    pub shift: ShiftId,
    pub account: AccountId,
    pub reason: EngineError,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftCreation {
    pub shifts: Vec<Shift>,
    pub refused: Vec<RefusedAssignment>,
    /// Created shifts lying partly outside the opening hours. Informational.
    pub outside_opening_hours: Vec<ShiftId>,
}

/// Fields to change on an existing shift; absent fields are kept.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftPatch {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub interval: Option<Interval>,
    #[serde(default)]
    pub min_staff: Option<u32>,
    #[serde(default, with = "double_option")]
    pub max_staff: Option<Option<u32>>,
    #[serde(default)]
    pub required_positions: Option<BTreeSet<PositionId>>,
    #[serde(default)]
    pub favorites: Option<BTreeSet<AccountId>>,
    #[serde(default)]
    pub work_from_home: Option<bool>,
}

mod double_option {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<Option<u32>>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(inner) => inner.serialize(s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<u32>>, D::Error> {
        Option::<u32>::deserialize(d).map(Some)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyMode {
    WithStaffChecked,
    WithStaffUnchecked,
    ShiftsOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedAssignment {
    pub source: ShiftId,
    pub shift: ShiftId,
    pub account: AccountId,
    pub reason: EngineError,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyOutcome {
    pub created: Vec<Shift>,
    pub skipped: Vec<SkippedAssignment>,
}

fn require_manager(roster: &Roster, actor: AccountId, schedule: ScheduleId) -> Result<(), EngineError> {
    if !roster.schedules.contains_key(&schedule) {
        return Err(EngineError::UnknownSchedule { id: schedule });
    }
    if !rights::can_manage(roster, actor, schedule) {
        return Err(EngineError::Forbidden);
    }
    Ok(())
}

fn check_staffing(min_staff: u32, max_staff: Option<u32>) -> Result<(), EngineError> {
    match max_staff {
        Some(0) => Err(EngineError::InvalidParams { detail: "max_staff must be at least 1".into() }),
        Some(max) if max < min_staff => Err(EngineError::InvalidParams { detail: "max_staff is below min_staff".into() }),
        _ => Ok(()),
    }
}

/// Moves `interval` to `date`, keeping its wall-clock start time in the
/// display zone and its length in minutes.
fn move_to(roster: &Roster, interval: &Interval, date: NaiveDate) -> Interval {
    let zone = roster.settings.display_zone;
    let start = Timestamp::from_local(zone, date, interval.start.local(zone).time());
    Interval { start, end: start.plus_minutes(interval.minutes()) }
}

/// Creates a shift, expanding a weekly recurrence into one shift per
/// occurrence. Requested assignees are checked on every occurrence;
/// occurrences where a check fails are created without that assignee and
/// the refusal is reported.
pub fn create_shift(roster: &mut Roster, actor: AccountId, draft: ShiftDraft) -> Result<ShiftCreation, EngineError> {
    require_manager(roster, actor, draft.schedule)?;
    check_staffing(draft.min_staff, draft.max_staff)?;
    if draft.title.trim().is_empty() {
        return Err(EngineError::InvalidParams { detail: "title must not be empty".into() });
    }
    for p in &draft.required_positions {
        if !roster.positions.contains_key(p) {
            return Err(EngineError::UnknownPosition { id: *p });
        }
    }
    for a in draft.favorites.iter().chain(&draft.assignments) {
        if !roster.accounts.contains_key(a) {
            return Err(EngineError::UnknownAccount { id: *a });
        }
    }
    let zone = roster.settings.display_zone;
    let first_date = draft.interval.start.local_date(zone);
    let mut dates = vec![first_date];
    if let Some(rule) = &draft.recurrence {
        if rule.weekdays.is_empty() {
            return Err(EngineError::InvalidParams { detail: "recurrence needs at least one weekday".into() });
        }
        if (rule.until - first_date).num_days() > MAX_RECURRENCE_DAYS {
            return Err(EngineError::InvalidParams { detail: format!("recurrence may span at most {MAX_RECURRENCE_DAYS} days") });
        }
        let mut d = first_date + Duration::days(1);
        while d <= rule.until {
            if rule.matches(d) {
                dates.push(d);
            }
            d += Duration::days(1);
        }
    }

    let mut out = ShiftCreation::default();
    let mut series = None;
    for (index, date) in dates.into_iter().enumerate() {
        let id = ShiftId(roster.allocate());
        let interval = if index == 0 { draft.interval } else { move_to(roster, &draft.interval, date) };
        let mut shift = Shift::new(id, draft.schedule, draft.title.trim(), interval);
        shift.min_staff = draft.min_staff;
        shift.max_staff = draft.max_staff;
        shift.required_positions = draft.required_positions.clone();
        shift.favorites = draft.favorites.clone();
        shift.work_from_home = draft.work_from_home;
        if index == 0 {
            shift.recurrence = draft.recurrence.clone();
            series = draft.recurrence.as_ref().map(|_| id);
        } else {
            shift.series = series;
        }
        roster.shifts.insert(id, shift);
        let force = draft.force && index == 0;
        for account in &draft.assignments {
            match check_assignment(roster, actor, id, *account, force) {
                Ok(()) => {
                    roster.shifts.get_mut(&id).expect("just inserted").assignments.insert(*account);
                }
                Err(reason) => out.refused.push(RefusedAssignment { shift: id, account: *account, reason }),
            }
        }
        if outside_opening_hours(roster, &interval) {
            out.outside_opening_hours.push(id);
        }
        out.shifts.push(roster.shifts[&id].clone());
    }
    Ok(out)
}

pub fn update_shift(roster: &mut Roster, actor: AccountId, id: ShiftId, patch: ShiftPatch) -> Result<Shift, EngineError> {
    let current = roster.shifts.get(&id).ok_or(EngineError::UnknownShift { id })?;
    require_manager(roster, actor, current.schedule)?;
    let mut next = current.clone();
    if let Some(title) = patch.title {
        if title.trim().is_empty() {
            return Err(EngineError::InvalidParams { detail: "title must not be empty".into() });
        }
        next.title = title.trim().to_string();
    }
    if let Some(interval) = patch.interval {
        next.interval = interval;
    }
    if let Some(min) = patch.min_staff {
        next.min_staff = min;
    }
    if let Some(max) = patch.max_staff {
        next.max_staff = max;
    }
    check_staffing(next.min_staff, next.max_staff)?;
    if next.max_staff.is_some_and(|max| next.assignments.len() as u64 > u64::from(max)) {
        return Err(EngineError::MaxStaffReached { shift: id });
    }
    if let Some(positions) = patch.required_positions {
        if let Some(p) = positions.iter().find(|p| !roster.positions.contains_key(p)) {
            return Err(EngineError::UnknownPosition { id: *p });
        }
        next.required_positions = positions;
    }
    if let Some(favorites) = patch.favorites {
        if let Some(a) = favorites.iter().find(|a| !roster.accounts.contains_key(a)) {
            return Err(EngineError::UnknownAccount { id: *a });
        }
        next.favorites = favorites;
    }
    if let Some(wfh) = patch.work_from_home {
        next.work_from_home = wfh;
    }
    for a in &next.assignments {
        let retained = roster.tombstones.contains_key(a) || roster.accounts.get(a).is_some_and(|x| x.anonymized);
        if !retained && !holds_required_position(roster, &next, *a) {
            return Err(EngineError::NotEligiblePosition { shift: id, account: *a });
        }
    }
    roster.shifts.insert(id, next.clone());
    Ok(next)
}

fn cancel_requests_on(roster: &mut Roster, id: ShiftId) {
    for r in roster.requests.values_mut() {
        if r.state.is_live() && (r.shift == id || r.counter_shift == Some(id)) {
            r.state = RequestState::Cancelled;
            r.version += 1;
        }
    }
}

/// Removes a shift and cancels the exchange requests that reference it.
pub fn delete_shift(roster: &mut Roster, actor: AccountId, id: ShiftId) -> Result<Shift, EngineError> {
    let shift = roster.shifts.get(&id).ok_or(EngineError::UnknownShift { id })?;
    require_manager(roster, actor, shift.schedule)?;
    cancel_requests_on(roster, id);
    Ok(roster.shifts.remove(&id).expect("checked"))
}

/// Replaces a shift by two contiguous shifts meeting at `at`. The original
/// id is retired and live requests on it are cancelled.
pub fn split_shift(roster: &mut Roster, actor: AccountId, id: ShiftId, at: Timestamp) -> Result<(Shift, Shift), EngineError> {
    let shift = roster.shifts.get(&id).ok_or(EngineError::UnknownShift { id })?.clone();
    require_manager(roster, actor, shift.schedule)?;
    if !(shift.interval.start < at && at < shift.interval.end) {
        return Err(EngineError::SplitOutOfRange);
    }
    let make = |roster: &mut Roster, interval: Interval| {
        let mut part = shift.clone();
        part.id = ShiftId(roster.allocate());
        part.interval = interval;
        part.recurrence = None;
        roster.shifts.insert(part.id, part.clone());
        part
    };
    let first = make(roster, Interval { start: shift.interval.start, end: at });
    let second = make(roster, Interval { start: at, end: shift.interval.end });
    cancel_requests_on(roster, id);
    roster.shifts.remove(&id);
    Ok((first, second))
}

fn monday_of(date: NaiveDate) -> NaiveDate {
    date - Duration::days(i64::from(date.weekday().num_days_from_monday()))
}

/// Clones the shifts of one week onto each target week, keeping weekday and
/// wall-clock time. Any date inside a week designates that week.
pub fn copy_week(
    roster: &mut Roster,
    actor: AccountId,
    schedule: ScheduleId,
    source_week: NaiveDate,
    target_weeks: &[NaiveDate],
    mode: CopyMode,
) -> Result<CopyOutcome, EngineError> {
    require_manager(roster, actor, schedule)?;
    if target_weeks.is_empty() {
        return Err(EngineError::InvalidParams { detail: "at least one target week is required".into() });
    }
    let zone = roster.settings.display_zone;
    let source = monday_of(source_week);
    let mut originals: Vec<Shift> = roster
        .shifts
        .values()
        .filter(|s| s.schedule == schedule)
        .filter(|s| {
            let d = s.interval.start.local_date(zone);
            source <= d && d < source + Duration::days(7)
        })
        .cloned()
        .collect();
    if originals.is_empty() {
        return Err(EngineError::SourceWeekEmpty);
    }
    originals.sort_by_key(|s| (s.interval.start, s.id));
    let targets: BTreeSet<NaiveDate> = target_weeks.iter().map(|d| monday_of(*d)).collect();

    let mut out = CopyOutcome::default();
    for target in targets {
        let offset = target - source;
        for original in &originals {
            let id = ShiftId(roster.allocate());
            let date = original.interval.start.local_date(zone) + offset;
            let mut clone = original.clone();
            clone.id = id;
            clone.interval = move_to(roster, &original.interval, date);
            clone.assignments.clear();
            clone.recurrence = None;
            clone.series = None;
            roster.shifts.insert(id, clone);
            if mode != CopyMode::ShiftsOnly {
                for account in &original.assignments {
                    let verdict = match check_assignment(roster, actor, id, *account, false) {
                        Err(EngineError::ConflictRefused { .. } | EngineError::QuotaRefused { .. }) if mode == CopyMode::WithStaffUnchecked => Ok(()),
                        other => other,
                    };
                    match verdict {
                        Ok(()) => {
                            roster.shifts.get_mut(&id).expect("just inserted").assignments.insert(*account);
                        }
                        Err(reason) => out.skipped.push(SkippedAssignment { source: original.id, shift: id, account: *account, reason }),
                    }
                }
            }
            out.created.push(roster.shifts[&id].clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::eligible_accounts;
    use crate::model::{Account, Role, TimeOff, TimeOffId, TimeOffState, WeekdayName};

    fn ts(s: &str) -> Timestamp {
        s.parse().unwrap()
    }

    fn iv(a: &str, b: &str) -> Interval {
        Interval::new(ts(a), ts(b)).unwrap()
    }

    fn setup() -> (Roster, AccountId, ScheduleId, AccountId) {
        let mut r = Roster::new();
        let admin = AccountId(r.allocate());
        let mut a = Account::new(admin, "Ad", "Min", "admin@x.org");
        a.role = Role::Admin;
        r.upsert_account(a).unwrap();
        let s = r.add_schedule("Desk", None).unwrap();
        let m = AccountId(r.allocate());
        r.upsert_account(Account::new(m, "Marie", "D", "m@x.org")).unwrap();
        r.add_member(s, m).unwrap();
        (r, admin, s, m)
    }

    #[test]
    fn minute_precision_shift() {
        let (mut r, admin, s, _) = setup();
        let out = create_shift(&mut r, admin, ShiftDraft::new(s, "Accueil", iv("2021-09-06T09:07:00Z", "2021-09-06T11:53:00Z"))).unwrap();
        assert_eq!(out.shifts[0].interval.minutes(), 166);
        assert_eq!(out.shifts[0].min_staff, 1);
        assert!(out.shifts[0].is_understaffed());
    }

    #[test]
    fn recurring_double_assignment_refused_per_occurrence() {
        let (mut r, admin, s, m) = setup();
        let weekly = WeeklyRecurrence { weekdays: [WeekdayName::Mon].into_iter().collect(), until: "2021-09-27".parse().unwrap() };
        let mut d = ShiftDraft::new(s, "Morning", iv("2021-09-06T09:00:00Z", "2021-09-06T12:00:00Z"));
        d.assignments.insert(m);
        d.recurrence = Some(weekly.clone());
        let first = create_shift(&mut r, admin, d.clone()).unwrap();
        assert_eq!(first.shifts.len(), 4);
        assert!(first.refused.is_empty());
        // same slot again, forced: the first occurrence is overridden, the rest refused
        d.title = "Chat".into();
        d.force = true;
        let second = create_shift(&mut r, admin, d).unwrap();
        assert_eq!(second.shifts.len(), 4);
        assert!(second.shifts[0].assignments.contains(&m));
        assert_eq!(second.refused.len(), 3);
        assert!(second.refused.iter().all(|x| matches!(x.reason, EngineError::ConflictRefused { .. })));
        assert!(second.shifts.iter().skip(1).all(|s| s.assignments.is_empty()));
    }

    #[test]
    fn split_partitions_and_keeps_staff() {
        let (mut r, admin, s, m) = setup();
        let mut d = ShiftDraft::new(s, "Day", iv("2021-09-06T09:00:00Z", "2021-09-06T17:00:00Z"));
        d.assignments.insert(m);
        let id = create_shift(&mut r, admin, d).unwrap().shifts[0].id;
        assert_eq!(split_shift(&mut r, admin, id, ts("2021-09-06T09:00:00Z")), Err(EngineError::SplitOutOfRange));
        let (a, b) = split_shift(&mut r, admin, id, ts("2021-09-06T13:00:00Z")).unwrap();
        assert_eq!(a.interval, iv("2021-09-06T09:00:00Z", "2021-09-06T13:00:00Z"));
        assert_eq!(b.interval, iv("2021-09-06T13:00:00Z", "2021-09-06T17:00:00Z"));
        assert!(a.assignments.contains(&m) && b.assignments.contains(&m));
        assert!(!r.shifts.contains_key(&id));
        assert_eq!(r.assignments_of(m).map(|s| s.interval.minutes()).sum::<i64>(), 480);
    }

    #[test]
    fn copy_week_modes() {
        let (mut r, admin, s, m) = setup();
        for day in 6..11 {
            let mut d = ShiftDraft::new(s, "Desk", iv(&format!("2021-09-{day:02}T09:00:00Z"), &format!("2021-09-{day:02}T12:00:00Z")));
            d.assignments.insert(m);
            create_shift(&mut r, admin, d).unwrap();
        }
        let src: NaiveDate = "2021-09-08".parse().unwrap();
        let unchecked = copy_week(&mut r, admin, s, src, &["2021-09-13".parse().unwrap()], CopyMode::WithStaffUnchecked).unwrap();
        assert_eq!(unchecked.created.len(), 5);
        assert!(unchecked.created.iter().all(|c| c.assignments.contains(&m)));
        assert_eq!(unchecked.created[0].interval, iv("2021-09-13T09:00:00Z", "2021-09-13T12:00:00Z"));

        r.time_off.insert(
            TimeOffId(999),
            TimeOff { id: TimeOffId(999), account: m, interval: iv("2021-09-22T00:00:00Z", "2021-09-23T00:00:00Z"), reason: String::new(), state: TimeOffState::Approved, external_uid: None },
        );
        let checked = copy_week(&mut r, admin, s, src, &["2021-09-20".parse().unwrap()], CopyMode::WithStaffChecked).unwrap();
        assert_eq!(checked.skipped.len(), 1);
        let skipped = &checked.skipped[0];
        assert!(r.shifts[&skipped.shift].assignments.is_empty());
        assert!(eligible_accounts(&r, skipped.shift, false).unwrap().iter().all(|c| !c.selectable));

        let bare = copy_week(&mut r, admin, s, src, &["2021-09-27".parse().unwrap()], CopyMode::ShiftsOnly).unwrap();
        assert!(bare.created.iter().all(|c| c.is_understaffed()));
        assert_eq!(copy_week(&mut r, admin, s, "2022-01-03".parse().unwrap(), &[src], CopyMode::ShiftsOnly), Err(EngineError::SourceWeekEmpty));
        assert_eq!(copy_week(&mut r, m, s, src, &[src], CopyMode::ShiftsOnly), Err(EngineError::Forbidden));
    }

    #[test]
    fn update_rejects_position_mismatch() {
        let (mut r, admin, s, m) = setup();
        let p = r.add_position("Clerk", None).unwrap();
        let mut d = ShiftDraft::new(s, "Desk", iv("2021-09-06T09:00:00Z", "2021-09-06T12:00:00Z"));
        d.assignments.insert(m);
        let id = create_shift(&mut r, admin, d).unwrap().shifts[0].id;
        let patch = ShiftPatch { required_positions: Some([p].into_iter().collect()), ..Default::default() };
        assert_eq!(update_shift(&mut r, admin, id, patch), Err(EngineError::NotEligiblePosition { shift: id, account: m }));
        let patch = ShiftPatch { max_staff: Some(Some(3)), min_staff: Some(2), ..Default::default() };
        let s2 = update_shift(&mut r, admin, id, patch).unwrap();
        assert_eq!((s2.min_staff, s2.max_staff), (2, Some(3)));
    }
}
