use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::assign::holds_required_position;
use super::conflicts::conflicts_for;
use super::quotas::{check_quotas, QuotaViolation};
use super::EngineError;
use crate::model::{AccountId, Roster, ScheduleId, Shift, ShiftId};
use crate::notify;
use crate::rights;
use crate::time::{DateRange, Interval};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoScheduleParams {
    pub schedules: BTreeSet<ScheduleId>,
    pub date_range: DateRange,
    #[serde(default)]
    pub favorites_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_shifts_per_day: Option<u32>,
    /// Minimum minutes between two assignments of one account.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<u32>,
    /// Reserved; the current strategy is fully deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl AutoScheduleParams {
    pub fn new(schedules: impl IntoIterator<Item = ScheduleId>, date_range: DateRange) -> Self {
        Self { schedules: schedules.into_iter().collect(), date_range, favorites_only: false, max_shifts_per_day: None, min_gap: None, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlannedAssignment {
    pub shift: ShiftId,
    pub account: AccountId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnfilledShift {
    pub shift: ShiftId,
    pub schedule: ScheduleId,
    pub interval: Interval,
    /// Assignees still missing to reach the minimum.
    pub missing: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoScheduleOutcome {
    pub assignments: Vec<PlannedAssignment>,
    pub unfilled: Vec<UnfilledShift>,
}

fn validate(roster: &Roster, actor: AccountId, params: &AutoScheduleParams) -> Result<(), EngineError> {
    if params.schedules.is_empty() {
        return Err(EngineError::InvalidParams { detail: "at least one schedule is required".into() });
    }
    if params.date_range.start >= params.date_range.end {
        return Err(EngineError::EmptyRange);
    }
    if params.max_shifts_per_day == Some(0) {
        return Err(EngineError::InvalidParams { detail: "max_shifts_per_day must be at least 1".into() });
    }
    for id in &params.schedules {
        if !roster.schedules.contains_key(id) {
            return Err(EngineError::UnknownSchedule { id: *id });
        }
        if !rights::can_manage(roster, actor, *id) {
            return Err(EngineError::Forbidden);
        }
    }
    Ok(())
}

fn in_scope(roster: &Roster, params: &AutoScheduleParams, shift: &Shift) -> bool {
    params.schedules.contains(&shift.schedule) && params.date_range.contains(shift.interval.start.local_date(roster.settings.display_zone))
}

/// Whether `account` may be placed on `shift` under every engine check and
/// the run's cap and gap rules.
fn passes(roster: &Roster, params: &AutoScheduleParams, shift: &Shift, account: AccountId) -> bool {
    if !conflicts_for(roster, account, shift.schedule, &shift.interval, Some(shift.id)).is_empty() {
        return false;
    }
    if check_quotas(roster, account, &shift.interval).iter().any(QuotaViolation::is_blocking) {
        return false;
    }
    let zone = roster.settings.display_zone;
    if let Some(cap) = params.max_shifts_per_day {
        let day = shift.interval.start.local_date(zone);
        let same_day = roster.assignments_of(account).filter(|s| s.interval.start.local_date(zone) == day).count();
        if same_day as u64 + 1 > u64::from(cap) {
            return false;
        }
    }
    if let Some(gap) = params.min_gap {
        if roster.assignments_of(account).any(|s| s.id != shift.id && s.interval.gap_minutes(&shift.interval) < i64::from(gap)) {
            return false;
        }
    }
    true
}

/// Computes the assignments the auto-scheduler would make, without applying them.
///
/// Understaffed shifts are visited chronologically (ties by id). Each open
/// slot goes to the first passing candidate ordered by favorite status, then
/// fewest assigned minutes within the date range, then id.
pub fn plan_auto_schedule(roster: &Roster, actor: AccountId, params: &AutoScheduleParams) -> Result<AutoScheduleOutcome, EngineError> {
    validate(roster, actor, params)?;
    let zone = roster.settings.display_zone;
    let mut work = roster.clone();
    let mut order: Vec<(crate::time::Timestamp, ShiftId)> =
        work.shifts.values().filter(|s| in_scope(&work, params, s)).map(|s| (s.interval.start, s.id)).collect();
    order.sort();

    let mut minutes: BTreeMap<AccountId, i64> = BTreeMap::new();
    for shift in work.shifts.values().filter(|s| params.date_range.contains(s.interval.start.local_date(zone))) {
        for a in &shift.assignments {
            *minutes.entry(*a).or_default() += shift.interval.minutes();
        }
    }

    let mut outcome = AutoScheduleOutcome::default();
    for (_, shift_id) in order {
        loop {
            let shift = &work.shifts[&shift_id];
            if shift.open_slots() == 0 {
                break;
            }
            let Some(schedule) = work.schedules.get(&shift.schedule) else { break };
            let mut candidates: Vec<(bool, i64, AccountId)> = schedule
                .members
                .iter()
                .copied()
                .filter(|a| !shift.assignments.contains(a))
                .filter(|a| work.accounts.get(a).is_some_and(|acc| !acc.anonymized))
                .filter(|a| !params.favorites_only || shift.favorites.contains(a))
                .filter(|a| holds_required_position(&work, shift, *a))
                .map(|a| (!shift.favorites.contains(&a), minutes.get(&a).copied().unwrap_or(0), a))
                .collect();
            candidates.sort();
            let Some(&(_, _, pick)) = candidates.iter().find(|(_, _, a)| passes(&work, params, shift, *a)) else {
                break;
            };
            let length = shift.interval.minutes();
            work.shifts.get_mut(&shift_id).expect("listed").assignments.insert(pick);
            *minutes.entry(pick).or_default() += length;
            outcome.assignments.push(PlannedAssignment { shift: shift_id, account: pick });
        }
        let shift = &work.shifts[&shift_id];
        if shift.is_understaffed() {
            outcome.unfilled.push(UnfilledShift {
                shift: shift_id,
                schedule: shift.schedule,
                interval: shift.interval,
                missing: shift.min_staff - shift.assignments.len() as u32,
            });
        }
    }
    Ok(outcome)
}

/// Plans and applies an auto-schedule run, notifying each new assignee.
pub fn auto_schedule(roster: &mut Roster, actor: AccountId, params: &AutoScheduleParams) -> Result<AutoScheduleOutcome, EngineError> {
    let outcome = plan_auto_schedule(roster, actor, params)?;
    for planned in &outcome.assignments {
        let shift = roster.shifts.get_mut(&planned.shift).expect("planned on a clone of this roster");
        shift.assignments.insert(planned.account);
        let shift = shift.clone();
        notify::shift_changed(roster, &shift, planned.account, notify::ASSIGNED);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Account, Role};
    use crate::time::Timestamp;

    fn setup(staff: usize) -> (Roster, AccountId, ScheduleId, Vec<AccountId>) {
        let mut r = Roster::new();
        let admin = AccountId(r.allocate());
        let mut a = Account::new(admin, "Ad", "Min", "admin@x.org");
        a.role = Role::Admin;
        r.upsert_account(a).unwrap();
        let s = r.add_schedule("Desk", None).unwrap();
        let mut ids = Vec::new();
        for i in 0..staff {
            let id = AccountId(r.allocate());
            r.upsert_account(Account::new(id, "S", &format!("{i}"), &format!("s{i}@x.org"))).unwrap();
            r.add_member(s, id).unwrap();
            ids.push(id);
        }
        (r, admin, s, ids)
    }

    fn hour_shift(r: &mut Roster, s: ScheduleId, day: i64, hour: i64) -> ShiftId {
        let base: Timestamp = "2021-09-06T00:00:00Z".parse().unwrap();
        let start = base.plus_minutes(day * 1440 + hour * 60);
        let id = ShiftId(r.allocate());
        r.shifts.insert(id, Shift::new(id, s, "Desk", Interval::new(start, start.plus_minutes(60)).unwrap()));
        id
    }

    fn week() -> DateRange {
        "2021-09-06..2021-09-13".parse().unwrap()
    }

    #[test]
    fn symmetric_instance_balances_two_each() {
        let (mut r, admin, s, staff) = setup(3);
        for h in 0..6 {
            hour_shift(&mut r, s, 0, 8 + h);
        }
        let out = auto_schedule(&mut r, admin, &AutoScheduleParams::new([s], week())).unwrap();
        assert_eq!(out.assignments.len(), 6);
        assert!(out.unfilled.is_empty());
        for a in staff {
            assert_eq!(r.assignments_of(a).count(), 2);
        }
    }

    #[test]
    fn favorites_only_leaves_shift_empty_when_favorites_busy() {
        let (mut r, admin, s, staff) = setup(3);
        let busy = hour_shift(&mut r, s, 0, 9);
        let target = hour_shift(&mut r, s, 0, 9);
        r.shifts.get_mut(&busy).unwrap().assignments.insert(staff[0]);
        r.shifts.get_mut(&target).unwrap().favorites.insert(staff[0]);
        let mut p = AutoScheduleParams::new([s], week());
        p.favorites_only = true;
        let out = plan_auto_schedule(&r, admin, &p).unwrap();
        assert!(out.assignments.is_empty());
        assert_eq!(out.unfilled.iter().map(|u| u.shift).collect::<Vec<_>>(), vec![target]);
        p.favorites_only = false;
        let out = plan_auto_schedule(&r, admin, &p).unwrap();
        assert_eq!(out.assignments, vec![PlannedAssignment { shift: target, account: staff[1] }]);
    }

    #[test]
    fn cap_and_gap_are_honored() {
        let (mut r, admin, s, staff) = setup(1);
        let a = hour_shift(&mut r, s, 0, 8);
        let b = hour_shift(&mut r, s, 0, 9);
        let c = hour_shift(&mut r, s, 0, 11);
        let mut p = AutoScheduleParams::new([s], week());
        p.min_gap = Some(60);
        let out = plan_auto_schedule(&r, admin, &p).unwrap();
        assert_eq!(out.assignments, vec![PlannedAssignment { shift: a, account: staff[0] }, PlannedAssignment { shift: c, account: staff[0] }]);
        assert_eq!(out.unfilled[0].shift, b);
        p.min_gap = None;
        p.max_shifts_per_day = Some(1);
        let out = plan_auto_schedule(&r, admin, &p).unwrap();
        assert_eq!(out.assignments.len(), 1);
        assert_eq!(out.unfilled.len(), 2);
    }

    #[test]
    fn guards() {
        let (mut r, admin, s, staff) = setup(1);
        hour_shift(&mut r, s, 0, 8);
        assert_eq!(plan_auto_schedule(&r, staff[0], &AutoScheduleParams::new([s], week())), Err(EngineError::Forbidden));
        let mut p = AutoScheduleParams::new([s], week());
        p.max_shifts_per_day = Some(0);
        assert!(matches!(plan_auto_schedule(&r, admin, &p), Err(EngineError::InvalidParams { .. })));
        let p = AutoScheduleParams::new([], week());
        assert!(matches!(plan_auto_schedule(&r, admin, &p), Err(EngineError::InvalidParams { .. })));
    }

    #[test]
    fn second_run_is_a_no_op() {
        let (mut r, admin, s, _) = setup(2);
        for h in 0..4 {
            hour_shift(&mut r, s, 1, 8 + h);
        }
        let p = AutoScheduleParams::new([s], week());
        let first = auto_schedule(&mut r, admin, &p).unwrap();
        assert_eq!(first.assignments.len(), 4);
        let second = auto_schedule(&mut r, admin, &p).unwrap();
        assert!(second.assignments.is_empty());
    }
}
