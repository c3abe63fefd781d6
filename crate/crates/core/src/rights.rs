//! Who may do what, per schedule.

use crate::model::{AccountId, ElevatedRights, Roster, ScheduleId};

pub fn is_admin(roster: &Roster, account: AccountId) -> bool {
    roster.accounts.get(&account).is_some_and(|a| a.is_admin())
}

/// Effective rights on a schedule. Admins hold everything everywhere.
pub fn rights_on(roster: &Roster, account: AccountId, schedule: ScheduleId) -> ElevatedRights {
    if is_admin(roster, account) {
        return ElevatedRights::FULL;
    }
    match roster.accounts.get(&account) {
        Some(a) if !a.anonymized => roster.schedules.get(&schedule).map(|s| s.rights_of(account)).unwrap_or_default(),
        _ => ElevatedRights::NONE,
    }
}

pub fn can_manage(roster: &Roster, account: AccountId, schedule: ScheduleId) -> bool {
    rights_on(roster, account, schedule).manage_shifts
}

pub fn can_view_stats(roster: &Roster, account: AccountId, schedule: ScheduleId) -> bool {
    rights_on(roster, account, schedule).view_stats
}

pub fn is_member(roster: &Roster, account: AccountId, schedule: ScheduleId) -> bool {
    roster.schedules.get(&schedule).is_some_and(|s| s.members.contains(&account))
}

/// Member, manager or admin.
pub fn can_view(roster: &Roster, account: AccountId, schedule: ScheduleId) -> bool {
    is_member(roster, account, schedule) || can_manage(roster, account, schedule)
}

/// Admin, or holder of `approve_time_off` on any schedule the target belongs to.
pub fn can_approve_time_off_for(roster: &Roster, approver: AccountId, target: AccountId) -> bool {
    if is_admin(roster, approver) {
        return true;
    }
    roster
        .schedules
        .values()
        .any(|s| s.members.contains(&target) && s.rights_of(approver).approve_time_off)
}

/// Accounts that should hear about a target's time-off: admins and approvers.
pub fn time_off_approvers(roster: &Roster, target: AccountId) -> Vec<AccountId> {
    let mut out: Vec<AccountId> = roster
        .accounts
        .values()
        .filter(|a| a.id != target && can_approve_time_off_for(roster, a.id, target))
        .map(|a| a.id)
        .collect();
    out.sort();
    out
}

/// Non-admin accounts holding `manage_shifts` on the schedule; falls back
/// to admins when nobody holds a grant.
pub fn schedule_managers(roster: &Roster, schedule: ScheduleId) -> Vec<AccountId> {
    let mut out: Vec<AccountId> = roster
        .schedules
        .get(&schedule)
        .map(|s| s.grants.iter().filter(|(_, r)| r.manage_shifts).map(|(a, _)| *a).collect())
        .unwrap_or_default();
    if out.is_empty() {
        out = roster.accounts.values().filter(|a| a.is_admin()).map(|a| a.id).collect();
    }
    out.sort();
    out
}
