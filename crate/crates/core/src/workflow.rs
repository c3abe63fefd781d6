//! Time-off approval and the four shift-exchange mechanisms.
//!
//! Every operation either applies completely or leaves the roster as it
//! was, including the outbox.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, check_assignment, eligible_accounts, ConflictReport, EngineError};
use crate::model::{
    AccountId, Decision, ExchangeKind, ExchangeRequest, RequestId, RequestState, Roster, ScheduleId, Shift, ShiftId, TimeOff, TimeOffId,
    TimeOffState,
};
use crate::notify;
use crate::rights;
use crate::time::{Interval, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum WorkflowError {
    #[error("self-service time-off entry is disabled")]
    SelfEntryDisabled,
    #[error("interval is empty")]
    EmptyInterval,
    #[error("request is not pending")]
    NotPending,
    #[error("forbidden")]
    Forbidden,
    #[error("shift claiming is disabled for this schedule")]
    ClaimingDisabled,
    #[error("shift {shift} is not understaffed")]
    NotUnderstaffed { shift: ShiftId },
    #[error("giving up shifts is disabled for this schedule")]
    GiveUpDisabled,
    #[error("dropping shifts is disabled for this schedule")]
    DropDisabled,
    #[error("swapping shifts is disabled for this schedule")]
    SwapDisabled,
    #[error("account {account} is not assigned to shift {shift}")]
    NotAssigned { shift: ShiftId, account: AccountId },
    #[error("the counterparty cannot take the shift: {} conflict(s)", reports.len())]
    CounterpartyConflict { reports: Vec<ConflictReport> },
    #[error("swaps must stay within one schedule")]
    CrossSchedule,
    #[error("a live {kind:?} request already exists for this shift")]
    DuplicateRequest { kind: ExchangeKind },
    #[error("unknown time-off {id}")]
    UnknownTimeOff { id: TimeOffId },
    #[error("unknown request {id}")]
    UnknownRequest { id: RequestId },
    #[error(transparent)]
    #[serde(untagged)]
    Engine(#[from] EngineError),
}

/// Inputs that drive an exchange request between states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestEvent {
    Accept,
    Cancel,
    Decline,
    Complete,
    RequireApproval,
    Approve,
    Reject,
}

impl RequestEvent {
    pub const ALL: [RequestEvent; 7] = [
        RequestEvent::Accept,
        RequestEvent::Cancel,
        RequestEvent::Decline,
        RequestEvent::Complete,
        RequestEvent::RequireApproval,
        RequestEvent::Approve,
        RequestEvent::Reject,
    ];
}

/// The exchange-request transition table.
pub fn transition(state: RequestState, event: RequestEvent) -> Option<RequestState> {
    use RequestEvent as E;
    use RequestState as S;
    match (state, event) {
        (S::Open, E::Accept) => Some(S::Accepted),
        (S::Open, E::Cancel) => Some(S::Cancelled),
        (S::Open, E::Decline) => Some(S::Rejected),
        (S::Accepted, E::Complete) => Some(S::Completed),
        (S::Accepted, E::RequireApproval) => Some(S::ApprovedPending),
        (S::ApprovedPending, E::Approve) => Some(S::Completed),
        (S::ApprovedPending, E::Reject) => Some(S::Rejected),
        _ => None,
    }
}

/// Moves a request through one transition, bumping its version.
pub fn advance(request: &mut ExchangeRequest, event: RequestEvent) -> Result<RequestState, WorkflowError> {
    let next = transition(request.state, event).ok_or(WorkflowError::NotPending)?;
    request.state = next;
    request.version += 1;
    Ok(next)
}

/// Runs `f` on a copy of the roster and keeps the result only on success.
pub fn atomically<T, E>(roster: &mut Roster, f: impl FnOnce(&mut Roster) -> Result<T, E>) -> Result<T, E> {
    let mut work = roster.clone();
    let value = f(&mut work)?;
    *roster = work;
    Ok(value)
}

fn shift_of(roster: &Roster, id: ShiftId) -> Result<&Shift, WorkflowError> {
    roster.shifts.get(&id).ok_or(WorkflowError::Engine(EngineError::UnknownShift { id }))
}

fn request_of(roster: &Roster, id: RequestId) -> Result<&ExchangeRequest, WorkflowError> {
    roster.requests.get(&id).ok_or(WorkflowError::UnknownRequest { id })
}

fn notify_all(roster: &mut Roster, recipients: &[AccountId], template: &str, actor: AccountId, counterparty: Option<AccountId>, shift: &Shift) {
    for r in recipients {
        let mut p = notify::payload(roster, *r, Some(actor), Some(shift));
        if let Some(c) = counterparty {
            p.insert("counterparty".into(), roster.account_label(c));
        }
        notify::push(roster, *r, template, p);
    }
}

fn managers_except(roster: &Roster, schedule: ScheduleId, except: &[AccountId]) -> Vec<AccountId> {
    rights::schedule_managers(roster, schedule).into_iter().filter(|a| !except.contains(a)).collect()
}

fn new_request(
    roster: &mut Roster,
    kind: ExchangeKind,
    shift: ShiftId,
    initiator: AccountId,
    counterparty: Option<AccountId>,
    counter_shift: Option<ShiftId>,
    now: Timestamp,
) -> Result<ExchangeRequest, WorkflowError> {
    let live = roster
        .requests
        .values()
        .any(|r| r.shift == shift && r.kind == kind && r.initiator == initiator && matches!(r.state, RequestState::Open | RequestState::Accepted));
    if live {
        return Err(WorkflowError::DuplicateRequest { kind });
    }
    let id = RequestId(roster.allocate());
    let request = ExchangeRequest { id, kind, shift, initiator, counterparty, counter_shift, state: RequestState::Open, created_at: now, version: 0 };
    roster.requests.insert(id, request.clone());
    Ok(request)
}

fn store(roster: &mut Roster, request: &ExchangeRequest) {
    roster.requests.insert(request.id, request.clone());
}

// ---- time-off ----

/// Files a time-off for `account`. Entering on someone else's behalf needs
/// approval rights over them.
pub fn request_time_off(
    roster: &mut Roster,
    actor: AccountId,
    account: AccountId,
    start: Timestamp,
    end: Timestamp,
    reason: &str,
) -> Result<TimeOff, WorkflowError> {
    roster.account(account).map_err(|_| EngineError::UnknownAccount { id: account })?;
    let on_behalf = actor != account;
    if on_behalf && !rights::can_approve_time_off_for(roster, actor, account) {
        return Err(WorkflowError::Forbidden);
    }
    if !on_behalf && !roster.settings.self_time_off_enabled && !rights::is_admin(roster, actor) {
        return Err(WorkflowError::SelfEntryDisabled);
    }
    let interval = Interval::new(start, end).map_err(|_| WorkflowError::EmptyInterval)?;
    Ok(record_time_off(roster, account, interval, reason, None))
}

/// Stores a time-off honoring the approval setting and alerts approvers.
/// An existing record with the same `external_uid` is updated in place.
pub fn record_time_off(roster: &mut Roster, account: AccountId, interval: Interval, reason: &str, external_uid: Option<String>) -> TimeOff {
    let state = if roster.settings.time_off_requires_approval { TimeOffState::Pending } else { TimeOffState::Approved };
    let existing = external_uid
        .as_ref()
        .and_then(|uid| roster.time_off.values().find(|t| t.account == account && t.external_uid.as_ref() == Some(uid)).map(|t| t.id));
    if let Some(id) = existing {
        let t = roster.time_off.get_mut(&id).expect("found above");
        if t.interval != interval || t.reason != reason {
            t.interval = interval;
            t.reason = reason.to_string();
            if t.state == TimeOffState::Denied {
                t.state = state;
            }
        }
        return t.clone();
    }
    let id = TimeOffId(roster.allocate());
    let record = TimeOff { id, account, interval, reason: reason.to_string(), state, external_uid };
    roster.time_off.insert(id, record.clone());
    let zone = roster.settings.display_zone;
    for approver in rights::time_off_approvers(roster, account) {
        let mut p = notify::payload(roster, approver, Some(account), None);
        p.insert("start".into(), interval.start.local(zone).format("%Y-%m-%d %H:%M").to_string());
        p.insert("end".into(), interval.end.local(zone).format("%Y-%m-%d %H:%M").to_string());
        p.insert("reason".into(), reason.to_string());
        notify::push(roster, approver, notify::TIME_OFF_REQUESTED, p);
    }
    record
}

pub fn resolve_time_off(roster: &mut Roster, approver: AccountId, id: TimeOffId, decision: Decision) -> Result<TimeOff, WorkflowError> {
    let t = roster.time_off.get(&id).ok_or(WorkflowError::UnknownTimeOff { id })?;
    if !rights::can_approve_time_off_for(roster, approver, t.account) {
        return Err(WorkflowError::Forbidden);
    }
    let next = t.state.resolve(decision).ok_or(WorkflowError::NotPending)?;
    let t = roster.time_off.get_mut(&id).expect("checked");
    t.state = next;
    let t = t.clone();
    let zone = roster.settings.display_zone;
    let mut p = notify::payload(roster, t.account, Some(approver), None);
    p.insert("start".into(), t.interval.start.local(zone).format("%Y-%m-%d %H:%M").to_string());
    p.insert("end".into(), t.interval.end.local(zone).format("%Y-%m-%d %H:%M").to_string());
    p.insert("reason".into(), t.reason.clone());
    let template = if next == TimeOffState::Approved { notify::TIME_OFF_APPROVED } else { notify::TIME_OFF_DENIED };
    notify::push(roster, t.account, template, p);
    Ok(t)
}

// ---- claim ----

/// Self-assignment to an understaffed shift, subject to every assignment check.
pub fn claim_shift(roster: &mut Roster, account: AccountId, shift_id: ShiftId, now: Timestamp) -> Result<(Shift, ExchangeRequest), WorkflowError> {
    let shift = shift_of(roster, shift_id)?;
    let schedule = roster.schedule(shift.schedule).map_err(|_| EngineError::UnknownSchedule { id: shift.schedule })?;
    if !schedule.settings.claiming_enabled {
        return Err(WorkflowError::ClaimingDisabled);
    }
    if !schedule.members.contains(&account) {
        return Err(EngineError::NotMember { account, schedule: schedule.id }.into());
    }
    if !shift.is_understaffed() {
        return Err(WorkflowError::NotUnderstaffed { shift: shift_id });
    }
    atomically(roster, |r| {
        let shift = engine::assign(r, account, shift_id, account, false)?;
        let mut request = new_request(r, ExchangeKind::Claim, shift_id, account, None, None, now)?;
        advance(&mut request, RequestEvent::Accept)?;
        advance(&mut request, RequestEvent::Complete)?;
        store(r, &request);
        let managers = managers_except(r, shift.schedule, &[account]);
        notify_all(r, &managers, notify::SHIFT_CLAIMED, account, None, &shift);
        Ok((shift, request))
    })
}

// ---- give-up ----

/// Offers an assigned shift to colleagues. The initiator stays assigned
/// until someone accepts.
pub fn give_up_shift(roster: &mut Roster, initiator: AccountId, shift_id: ShiftId, now: Timestamp) -> Result<ExchangeRequest, WorkflowError> {
    let shift = shift_of(roster, shift_id)?.clone();
    let schedule = roster.schedule(shift.schedule).map_err(|_| EngineError::UnknownSchedule { id: shift.schedule })?;
    if !schedule.settings.give_up_enabled {
        return Err(WorkflowError::GiveUpDisabled);
    }
    if !shift.assignments.contains(&initiator) {
        return Err(WorkflowError::NotAssigned { shift: shift_id, account: initiator });
    }
    atomically(roster, |r| {
        let request = new_request(r, ExchangeKind::GiveUp, shift_id, initiator, None, None, now)?;
        let mut probe = r.clone();
        probe.shifts.get_mut(&shift_id).expect("exists").assignments.remove(&initiator);
        let recipients: Vec<AccountId> =
            eligible_accounts(&probe, shift_id, false)?.into_iter().filter(|c| c.selectable && c.account != initiator).map(|c| c.account).collect();
        notify_all(r, &recipients, notify::GIVE_UP_OFFERED, initiator, None, &shift);
        Ok(request)
    })
}

/// Takes over a given-up shift. The first acceptor wins; later ones get
/// `NotPending`, as does a stale `expected_version`.
pub fn accept_give_up(roster: &mut Roster, acceptor: AccountId, id: RequestId, expected_version: Option<u64>) -> Result<ExchangeRequest, WorkflowError> {
    let request = request_of(roster, id)?.clone();
    if request.kind != ExchangeKind::GiveUp {
        return Err(WorkflowError::NotPending);
    }
    if request.state != RequestState::Open || expected_version.is_some_and(|v| v != request.version) {
        return Err(WorkflowError::NotPending);
    }
    if acceptor == request.initiator {
        return Err(WorkflowError::Forbidden);
    }
    atomically(roster, |r| {
        let mut request = request;
        engine::unassign(r, request.shift, request.initiator).map_err(|_| WorkflowError::NotAssigned { shift: request.shift, account: request.initiator })?;
        engine::assign(r, acceptor, request.shift, acceptor, false)?;
        request.counterparty = Some(acceptor);
        advance(&mut request, RequestEvent::Accept)?;
        advance(&mut request, RequestEvent::Complete)?;
        store(r, &request);
        let shift = r.shifts[&request.shift].clone();
        let mut recipients = vec![request.initiator];
        recipients.extend(managers_except(r, shift.schedule, &[request.initiator, acceptor]));
        notify_all(r, &recipients, notify::GIVE_UP_COMPLETED, request.initiator, Some(acceptor), &shift);
        Ok(request)
    })
}

/// Withdraws an open request. Initiators and schedule managers may cancel.
pub fn cancel_request(roster: &mut Roster, actor: AccountId, id: RequestId) -> Result<ExchangeRequest, WorkflowError> {
    let mut request = request_of(roster, id)?.clone();
    let schedule = roster.shifts.get(&request.shift).map(|s| s.schedule);
    let manager = schedule.is_some_and(|s| rights::can_manage(roster, actor, s));
    if actor != request.initiator && !manager {
        return Err(WorkflowError::Forbidden);
    }
    advance(&mut request, RequestEvent::Cancel)?;
    store(roster, &request);
    Ok(request)
}

// ---- drop ----

/// Leaves a shift at once, optionally handing it to a named replacement.
pub fn drop_shift(
    roster: &mut Roster,
    initiator: AccountId,
    shift_id: ShiftId,
    replacement: Option<AccountId>,
    now: Timestamp,
) -> Result<(Shift, ExchangeRequest), WorkflowError> {
    let shift = shift_of(roster, shift_id)?;
    let schedule = roster.schedule(shift.schedule).map_err(|_| EngineError::UnknownSchedule { id: shift.schedule })?;
    if !schedule.settings.drop_enabled {
        return Err(WorkflowError::DropDisabled);
    }
    if !shift.assignments.contains(&initiator) {
        return Err(WorkflowError::NotAssigned { shift: shift_id, account: initiator });
    }
    atomically(roster, |r| {
        engine::unassign(r, shift_id, initiator)?;
        if let Some(rep) = replacement {
            engine::assign(r, initiator, shift_id, rep, false)?;
        }
        let mut request = new_request(r, ExchangeKind::Drop, shift_id, initiator, replacement, None, now)?;
        advance(&mut request, RequestEvent::Accept)?;
        advance(&mut request, RequestEvent::Complete)?;
        store(r, &request);
        let shift = r.shifts[&shift_id].clone();
        let managers = managers_except(r, shift.schedule, &[initiator]);
        notify_all(r, &managers, notify::SHIFT_DROPPED, initiator, replacement, &shift);
        Ok((shift, request))
    })
}

// ---- swap ----

fn into_counterparty_error(e: EngineError) -> WorkflowError {
    match e {
        EngineError::ConflictRefused { reports } => WorkflowError::CounterpartyConflict { reports },
        other => WorkflowError::Engine(other),
    }
}

/// Performs both reassignments of a swap on `r`, checking every assignment.
fn exchange(r: &mut Roster, request: &ExchangeRequest) -> Result<(), WorkflowError> {
    let counterparty = request.counterparty.ok_or(WorkflowError::NotPending)?;
    let a = request.shift;
    if !r.shifts.get(&a).is_some_and(|s| s.assignments.contains(&request.initiator)) {
        return Err(WorkflowError::NotAssigned { shift: a, account: request.initiator });
    }
    engine::unassign(r, a, request.initiator)?;
    if let Some(b) = request.counter_shift {
        if !r.shifts.get(&b).is_some_and(|s| s.assignments.contains(&counterparty)) {
            return Err(WorkflowError::NotAssigned { shift: b, account: counterparty });
        }
        engine::unassign(r, b, counterparty)?;
        engine::assign(r, counterparty, a, counterparty, false).map_err(into_counterparty_error)?;
        engine::assign(r, request.initiator, b, request.initiator, false).map_err(into_counterparty_error)?;
    } else {
        engine::assign(r, counterparty, a, counterparty, false).map_err(into_counterparty_error)?;
    }
    Ok(())
}

/// Proposes to hand `shift` to `counterparty`, taking `counter_shift` from
/// them in exchange when given. The swap must be feasible when proposed.
pub fn request_swap(
    roster: &mut Roster,
    initiator: AccountId,
    shift_id: ShiftId,
    counterparty: AccountId,
    counter_shift: Option<ShiftId>,
    now: Timestamp,
) -> Result<ExchangeRequest, WorkflowError> {
    let shift = shift_of(roster, shift_id)?.clone();
    let schedule = roster.schedule(shift.schedule).map_err(|_| EngineError::UnknownSchedule { id: shift.schedule })?;
    if !schedule.settings.swap_enabled {
        return Err(WorkflowError::SwapDisabled);
    }
    if !shift.assignments.contains(&initiator) {
        return Err(WorkflowError::NotAssigned { shift: shift_id, account: initiator });
    }
    if counterparty == initiator {
        return Err(WorkflowError::Forbidden);
    }
    if !schedule.members.contains(&counterparty) {
        return Err(EngineError::NotMember { account: counterparty, schedule: schedule.id }.into());
    }
    if let Some(b) = counter_shift {
        let other = shift_of(roster, b)?;
        if other.schedule != shift.schedule {
            return Err(WorkflowError::CrossSchedule);
        }
    }
    atomically(roster, |r| {
        let request = new_request(r, ExchangeKind::Swap, shift_id, initiator, Some(counterparty), counter_shift, now)?;
        let mut probe = r.clone();
        exchange(&mut probe, &request)?;
        notify_all(r, &[counterparty], notify::SWAP_REQUESTED, initiator, Some(counterparty), &shift);
        Ok(request)
    })
}

/// The counterparty's answer. Accepting completes the swap at once unless
/// the schedule requires a manager's approval.
pub fn respond_swap(roster: &mut Roster, actor: AccountId, id: RequestId, accept: bool) -> Result<ExchangeRequest, WorkflowError> {
    let request = request_of(roster, id)?.clone();
    if request.kind != ExchangeKind::Swap {
        return Err(WorkflowError::NotPending);
    }
    if request.counterparty != Some(actor) {
        return Err(WorkflowError::Forbidden);
    }
    let counterparty = actor;
    atomically(roster, |r| {
        let mut request = request;
        let shift = r.shifts.get(&request.shift).cloned().ok_or(EngineError::UnknownShift { id: request.shift })?;
        if !accept {
            advance(&mut request, RequestEvent::Decline)?;
            store(r, &request);
            notify_all(r, &[request.initiator], notify::SWAP_REJECTED, request.initiator, Some(counterparty), &shift);
            return Ok(request);
        }
        advance(&mut request, RequestEvent::Accept)?;
        let needs_approval = r.schedules.get(&shift.schedule).is_some_and(|s| s.settings.swap_requires_approval);
        if needs_approval {
            let mut probe = r.clone();
            exchange(&mut probe, &request)?;
            advance(&mut request, RequestEvent::RequireApproval)?;
            store(r, &request);
            let managers = managers_except(r, shift.schedule, &[request.initiator, counterparty]);
            notify_all(r, &managers, notify::SWAP_PENDING_APPROVAL, request.initiator, Some(counterparty), &shift);
        } else {
            exchange(r, &request)?;
            advance(&mut request, RequestEvent::Complete)?;
            store(r, &request);
            notify_all(r, &[request.initiator, counterparty], notify::SWAP_COMPLETED, request.initiator, Some(counterparty), &shift);
        }
        Ok(request)
    })
}

/// A manager's decision on a swap awaiting approval. Rejection is final;
/// the parties may file a new request.
pub fn resolve_swap(roster: &mut Roster, manager: AccountId, id: RequestId, approve: bool) -> Result<ExchangeRequest, WorkflowError> {
    let request = request_of(roster, id)?.clone();
    if request.kind != ExchangeKind::Swap {
        return Err(WorkflowError::NotPending);
    }
    let shift = shift_of(roster, request.shift)?.clone();
    if !rights::can_manage(roster, manager, shift.schedule) {
        return Err(WorkflowError::Forbidden);
    }
    let counterparty = request.counterparty;
    atomically(roster, |r| {
        let mut request = request;
        if approve {
            advance(&mut request, RequestEvent::Approve)?;
            exchange(r, &request)?;
            store(r, &request);
            let parties: Vec<AccountId> = [Some(request.initiator), counterparty].into_iter().flatten().collect();
            notify_all(r, &parties, notify::SWAP_COMPLETED, request.initiator, counterparty, &shift);
        } else {
            advance(&mut request, RequestEvent::Reject)?;
            store(r, &request);
            let parties: Vec<AccountId> = [Some(request.initiator), counterparty].into_iter().flatten().collect();
            notify_all(r, &parties, notify::SWAP_REJECTED, request.initiator, counterparty, &shift);
        }
        Ok(request)
    })
}

/// Whether `actor` could legally take the shift right now. Used to list
/// give-up offers a member may accept.
pub fn can_take_over(roster: &Roster, actor: AccountId, request: &ExchangeRequest) -> bool {
    if request.kind != ExchangeKind::GiveUp || request.state != RequestState::Open || actor == request.initiator {
        return false;
    }
    let mut probe = roster.clone();
    let Some(shift) = probe.shifts.get_mut(&request.shift) else { return false };
    if !shift.assignments.remove(&request.initiator) {
        return false;
    }
    check_assignment(&probe, actor, request.shift, actor, false).is_ok()
}
