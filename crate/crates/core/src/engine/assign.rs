use chrono::Datelike;
use serde::Serialize;

use super::conflicts::{conflicts_for, ConflictReport};
use super::quotas::{check_quotas, QuotaViolation};
use super::EngineError;
use crate::model::{AccountId, Roster, Shift, ShiftId};
use crate::notify;
use crate::rights;
use crate::time::Interval;

/// One row of the assignment picker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub account: AccountId,
    pub favorite: bool,
    /// Minutes already assigned in the ISO week of the shift.
    pub week_minutes: i64,
    pub conflicts: Vec<ConflictReport>,
    pub quota_violations: Vec<QuotaViolation>,
    pub selectable: bool,
}

pub fn understaffed(shift: &Shift) -> bool {
    shift.is_understaffed()
}

/// Minutes the account works in the ISO week (display zone) containing `at`.
pub(crate) fn week_minutes(roster: &Roster, account: AccountId, interval: &Interval) -> i64 {
    let zone = roster.settings.display_zone;
    let week = interval.start.local_date(zone).iso_week();
    roster
        .assignments_of(account)
        .filter(|s| s.interval.start.local_date(zone).iso_week() == week)
        .map(|s| s.interval.minutes())
        .sum()
}

pub(crate) fn holds_required_position(roster: &Roster, shift: &Shift, account: AccountId) -> bool {
    shift.required_positions.is_empty()
        || roster.accounts.get(&account).is_some_and(|a| !a.positions.is_disjoint(&shift.required_positions))
}

/// Schedule members holding a required position, favorites first, then the
/// least loaded in the shift's week, then by id.
pub fn eligible_accounts(roster: &Roster, shift_id: ShiftId, force: bool) -> Result<Vec<Candidate>, EngineError> {
    let shift = roster.shifts.get(&shift_id).ok_or(EngineError::UnknownShift { id: shift_id })?;
    let schedule = roster.schedule(shift.schedule).map_err(|_| EngineError::UnknownSchedule { id: shift.schedule })?;
    let mut out: Vec<Candidate> = schedule
        .members
        .iter()
        .copied()
        .filter(|a| !shift.assignments.contains(a))
        .filter(|a| roster.accounts.get(a).is_some_and(|acc| !acc.anonymized))
        .filter(|a| holds_required_position(roster, shift, *a))
        .map(|account| {
            let conflicts = conflicts_for(roster, account, shift.schedule, &shift.interval, Some(shift.id));
            let quota_violations = check_quotas(roster, account, &shift.interval);
            let blocked = !conflicts.is_empty() || quota_violations.iter().any(QuotaViolation::is_blocking);
            Candidate {
                account,
                favorite: shift.favorites.contains(&account),
                week_minutes: week_minutes(roster, account, &shift.interval),
                conflicts,
                quota_violations,
                selectable: force || !blocked,
            }
        })
        .collect();
    out.sort_by_key(|c| (!c.favorite, c.week_minutes, c.account));
    Ok(out)
}

/// Every check `assign` performs, without mutating anything.
pub fn check_assignment(roster: &Roster, actor: AccountId, shift_id: ShiftId, account: AccountId, force: bool) -> Result<(), EngineError> {
    let shift = roster.shifts.get(&shift_id).ok_or(EngineError::UnknownShift { id: shift_id })?;
    let acc = roster.accounts.get(&account).ok_or(EngineError::UnknownAccount { id: account })?;
    if acc.anonymized {
        return Err(EngineError::AccountAnonymized { id: account });
    }
    if shift.assignments.contains(&account) {
        return Err(EngineError::AlreadyAssigned { shift: shift_id, account });
    }
    if !rights::is_member(roster, account, shift.schedule) {
        return Err(EngineError::NotMember { account, schedule: shift.schedule });
    }
    if force && !rights::can_manage(roster, actor, shift.schedule) {
        return Err(EngineError::ForbiddenForce);
    }
    if !holds_required_position(roster, shift, account) {
        return Err(EngineError::NotEligiblePosition { shift: shift_id, account });
    }
    if shift.is_full() {
        return Err(EngineError::MaxStaffReached { shift: shift_id });
    }
    if force {
        return Ok(());
    }
    let reports = conflicts_for(roster, account, shift.schedule, &shift.interval, Some(shift.id));
    if !reports.is_empty() {
        return Err(EngineError::ConflictRefused { reports });
    }
    let violations: Vec<QuotaViolation> =
        check_quotas(roster, account, &shift.interval).into_iter().filter(QuotaViolation::is_blocking).collect();
    if !violations.is_empty() {
        return Err(EngineError::QuotaRefused { violations });
    }
    Ok(())
}

/// Adds `account` to the shift. `force` overrides conflicts and quotas for
/// this one shift instance and requires `actor` to manage the schedule.
pub fn assign(roster: &mut Roster, actor: AccountId, shift_id: ShiftId, account: AccountId, force: bool) -> Result<Shift, EngineError> {
    check_assignment(roster, actor, shift_id, account, force)?;
    let shift = roster.shifts.get_mut(&shift_id).expect("checked");
    shift.assignments.insert(account);
    let shift = shift.clone();
    notify::shift_changed(roster, &shift, account, notify::ASSIGNED);
    Ok(shift)
}

pub fn unassign(roster: &mut Roster, shift_id: ShiftId, account: AccountId) -> Result<Shift, EngineError> {
    let shift = roster.shifts.get_mut(&shift_id).ok_or(EngineError::UnknownShift { id: shift_id })?;
    if !shift.assignments.remove(&account) {
        return Err(EngineError::NotAssigned { shift: shift_id, account });
    }
    let shift = shift.clone();
    notify::shift_changed(roster, &shift, account, notify::UNASSIGNED);
    Ok(shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ConflictKind;
    use crate::model::{Account, ElevatedRights, TimeOff, TimeOffId, TimeOffState};
    use crate::time::Timestamp;

    fn ts(s: &str) -> Timestamp {
        format!("2021-09-06T{s}:00Z").parse().unwrap()
    }

    fn iv(a: &str, b: &str) -> Interval {
        Interval::new(ts(a), ts(b)).unwrap()
    }

    struct Fixture {
        r: Roster,
        manager: AccountId,
        members: Vec<AccountId>,
        desk: crate::model::ScheduleId,
        chat: crate::model::ScheduleId,
    }

    fn fixture() -> Fixture {
        let mut r = Roster::new();
        let desk = r.add_schedule("Desk", None).unwrap();
        let chat = r.add_schedule("Chat", None).unwrap();
        let mut members = Vec::new();
        for i in 0..5 {
            let id = AccountId(r.allocate());
            r.upsert_account(Account::new(id, "M", &format!("{i}"), &format!("m{i}@x.org"))).unwrap();
            r.add_member(desk, id).unwrap();
            r.add_member(chat, id).unwrap();
            members.push(id);
        }
        let manager = AccountId(r.allocate());
        r.upsert_account(Account::new(manager, "Boss", "B", "boss@x.org")).unwrap();
        r.add_member(desk, manager).unwrap();
        r.grant_rights(desk, manager, ElevatedRights::new(true, false, false).unwrap()).unwrap();
        Fixture { r, manager, members, desk, chat }
    }

    fn add_shift(r: &mut Roster, schedule: crate::model::ScheduleId, i: Interval) -> ShiftId {
        let id = ShiftId(r.allocate());
        r.shifts.insert(id, Shift::new(id, schedule, "Accueil", i));
        id
    }

    #[test]
    fn position_filter_lists_only_holders() {
        let mut f = fixture();
        let p = f.r.add_position("P", None).unwrap();
        for a in &f.members[..2] {
            f.r.accounts.get_mut(a).unwrap().positions.insert(p);
        }
        let s = add_shift(&mut f.r, f.desk, iv("09:00", "12:00"));
        f.r.shifts.get_mut(&s).unwrap().required_positions.insert(p);
        let listed: Vec<_> = eligible_accounts(&f.r, s, false).unwrap().into_iter().map(|c| c.account).collect();
        assert_eq!(listed, f.members[..2].to_vec());
    }

    #[test]
    fn approved_time_off_makes_candidate_non_selectable() {
        let mut f = fixture();
        let s = add_shift(&mut f.r, f.desk, iv("09:00", "12:00"));
        let who = f.members[0];
        f.r.time_off.insert(
            TimeOffId(900),
            TimeOff { id: TimeOffId(900), account: who, interval: iv("08:00", "18:00"), reason: "training".into(), state: TimeOffState::Approved, external_uid: None },
        );
        let list = eligible_accounts(&f.r, s, false).unwrap();
        let row = list.iter().find(|c| c.account == who).unwrap();
        assert!(!row.selectable);
        assert_eq!(row.conflicts[0].kind, ConflictKind::TimeOffOverlap);
        assert!(eligible_accounts(&f.r, s, true).unwrap().iter().all(|c| c.selectable));
    }

    #[test]
    fn overlap_in_other_schedule_is_reported() {
        let mut f = fixture();
        let who = f.members[1];
        let elsewhere = add_shift(&mut f.r, f.chat, iv("09:00", "12:00"));
        f.r.shifts.get_mut(&elsewhere).unwrap().assignments.insert(who);
        let s = add_shift(&mut f.r, f.desk, iv("11:00", "13:00"));
        let list = eligible_accounts(&f.r, s, false).unwrap();
        let row = list.iter().find(|c| c.account == who).unwrap();
        assert_eq!(row.conflicts.len(), 1);
        assert_eq!(row.conflicts[0].kind, ConflictKind::OverlapOtherSchedule);
        assert_eq!(row.conflicts[0].shift, Some(elsewhere));
        // the busy member sorts after the idle ones
        assert_eq!(list.last().unwrap().account, who);
    }

    #[test]
    fn force_is_manager_only_and_single_instance() {
        let mut f = fixture();
        let who = f.members[0];
        let a = add_shift(&mut f.r, f.desk, iv("09:00", "12:00"));
        let b = add_shift(&mut f.r, f.desk, iv("10:00", "11:00"));
        assign(&mut f.r, f.manager, a, who, false).unwrap();
        assert!(matches!(assign(&mut f.r, f.manager, b, who, false), Err(EngineError::ConflictRefused { .. })));
        assert_eq!(assign(&mut f.r, f.members[2], b, who, true), Err(EngineError::ForbiddenForce));
        let shift = assign(&mut f.r, f.manager, b, who, true).unwrap();
        assert!(shift.assignments.contains(&who));
    }

    #[test]
    fn max_staff_and_membership_guards() {
        let mut f = fixture();
        let s = add_shift(&mut f.r, f.desk, iv("09:00", "12:00"));
        f.r.shifts.get_mut(&s).unwrap().max_staff = Some(1);
        assign(&mut f.r, f.manager, s, f.members[0], false).unwrap();
        assert_eq!(assign(&mut f.r, f.manager, s, f.members[1], true), Err(EngineError::MaxStaffReached { shift: s }));
        let outsider = AccountId(f.r.allocate());
        f.r.upsert_account(Account::new(outsider, "O", "O", "o@x.org")).unwrap();
        assert!(matches!(assign(&mut f.r, f.manager, s, outsider, false), Err(EngineError::NotMember { .. })));
    }

    #[test]
    fn unassign_round_trip_and_understaffing() {
        let mut f = fixture();
        let s = add_shift(&mut f.r, f.desk, iv("09:00", "12:00"));
        let before = f.r.shifts[&s].clone();
        assert!(understaffed(&before));
        assign(&mut f.r, f.manager, s, f.members[0], false).unwrap();
        assert!(!understaffed(&f.r.shifts[&s]));
        let after = unassign(&mut f.r, s, f.members[0]).unwrap();
        assert_eq!(after, before);
        assert!(understaffed(&after));
        assert_eq!(unassign(&mut f.r, s, f.members[0]), Err(EngineError::NotAssigned { shift: s, account: f.members[0] }));
        let row = eligible_accounts(&f.r, s, false).unwrap().into_iter().find(|c| c.account == f.members[0]).unwrap();
        assert!(row.selectable);
    }

    #[test]
    fn understaffed_ignores_time_off_of_assignees() {
        let mut f = fixture();
        let s = add_shift(&mut f.r, f.desk, iv("09:00", "12:00"));
        f.r.shifts.get_mut(&s).unwrap().min_staff = 2;
        assign(&mut f.r, f.manager, s, f.members[0], false).unwrap();
        assign(&mut f.r, f.manager, s, f.members[1], false).unwrap();
        f.r.time_off.insert(
            TimeOffId(901),
            TimeOff { id: TimeOffId(901), account: f.members[0], interval: iv("00:00", "23:00"), reason: String::new(), state: TimeOffState::Approved, external_uid: None },
        );
        assert!(!understaffed(&f.r.shifts[&s]));
        f.r.shifts.get_mut(&s).unwrap().min_staff = 0;
        f.r.shifts.get_mut(&s).unwrap().assignments.clear();
        assert!(!understaffed(&f.r.shifts[&s]));
    }
}
