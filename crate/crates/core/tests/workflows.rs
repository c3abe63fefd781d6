use std::collections::BTreeSet;

use proptest::prelude::*;
use rosterd_core::engine::{self, EngineError};
use rosterd_core::model::*;
use rosterd_core::notify;
use rosterd_core::testkit::{iv, random_world, ts, Knobs};
use rosterd_core::time::Timestamp;
use rosterd_core::workflow::{self, RequestEvent, WorkflowError};

struct Desk {
    r: Roster,
    admin: AccountId,
    manager: AccountId,
    m: Vec<AccountId>,
    s: ScheduleId,
}

impl Desk {
    fn new() -> Self {
        let mut r = Roster::new();
        r.settings.time_off_requires_approval = false;
        let admin = AccountId(r.allocate());
        let mut a = Account::new(admin, "Ada", "Admin", "admin@example.org");
        a.role = Role::Admin;
        r.upsert_account(a).unwrap();
        let manager = AccountId(r.allocate());
        r.upsert_account(Account::new(manager, "Max", "Manager", "max@example.org")).unwrap();
        let s = r.add_schedule("Circulation", None).unwrap();
        r.add_member(s, manager).unwrap();
        r.grant_rights(s, manager, ElevatedRights::FULL).unwrap();
        let mut m = Vec::new();
        for (g, f) in [("Marie", "Dubois"), ("Jean", "Martin"), ("Zoé", "Petit"), ("Luc", "Roy")] {
            let id = AccountId(r.allocate());
            r.upsert_account(Account::new(id, g, f, &format!("{}@example.org", g.to_lowercase()))).unwrap();
            r.add_member(s, id).unwrap();
            m.push(id);
        }
        Desk { r, admin, manager, m, s }
    }

    fn shift(&mut self, a: &str, b: &str, staff: &[AccountId]) -> ShiftId {
        let id = ShiftId(self.r.allocate());
        let mut sh = Shift::new(id, self.s, "Desk", iv(a, b));
        sh.assignments.extend(staff.iter().copied());
        self.r.shifts.insert(id, sh);
        id
    }

    fn snapshot(&self) -> Vec<u8> {
        serde_json::to_vec(&self.r).unwrap()
    }
}

fn now() -> Timestamp {
    ts("2021-09-01T08:00:00Z")
}

const DECLARED: &[(RequestState, RequestEvent, RequestState)] = &[
    (RequestState::Open, RequestEvent::Accept, RequestState::Accepted),
    (RequestState::Open, RequestEvent::Cancel, RequestState::Cancelled),
    (RequestState::Open, RequestEvent::Decline, RequestState::Rejected),
    (RequestState::Accepted, RequestEvent::Complete, RequestState::Completed),
    (RequestState::Accepted, RequestEvent::RequireApproval, RequestState::ApprovedPending),
    (RequestState::ApprovedPending, RequestEvent::Approve, RequestState::Completed),
    (RequestState::ApprovedPending, RequestEvent::Reject, RequestState::Rejected),
];

#[test]
fn every_state_event_pair_follows_the_table() {
    let mut successes = 0;
    for state in RequestState::ALL {
        for event in RequestEvent::ALL {
            let mut req = ExchangeRequest {
                id: RequestId(1),
                kind: ExchangeKind::Swap,
                shift: ShiftId(1),
                initiator: AccountId(1),
                counterparty: None,
                counter_shift: None,
                state,
                created_at: now(),
                version: 3,
            };
            let want = DECLARED.iter().find(|(s, e, _)| *s == state && *e == event).map(|t| t.2);
            match (workflow::advance(&mut req, event), want) {
                (Ok(next), Some(w)) => {
                    assert_eq!(next, w);
                    assert_eq!(req.version, 4);
                    successes += 1;
                }
                (Err(WorkflowError::NotPending), None) => assert_eq!((req.state, req.version), (state, 3)),
                (got, want) => panic!("{state:?} x {event:?}: got {got:?}, want {want:?}"),
            }
        }
    }
    assert_eq!(successes, DECLARED.len());
}

#[test]
fn time_off_approval_setting_and_guards() {
    let mut d = Desk::new();
    let who = d.m[0];
    let t = workflow::request_time_off(&mut d.r, who, who, ts("2021-09-07T08:00:00Z"), ts("2021-09-07T12:00:00Z"), "dentist").unwrap();
    assert_eq!(t.state, TimeOffState::Approved);

    d.r.settings.time_off_requires_approval = true;
    let before = d.r.outbox.len();
    let t = workflow::request_time_off(&mut d.r, who, who, ts("2021-09-08T08:00:00Z"), ts("2021-09-08T12:00:00Z"), "course").unwrap();
    assert_eq!(t.state, TimeOffState::Pending);
    let alerted: BTreeSet<AccountId> = d.r.outbox[before..].iter().filter(|e| e.notification.template == notify::TIME_OFF_REQUESTED).map(|e| e.notification.recipient).collect();
    assert_eq!(alerted, BTreeSet::from([d.admin, d.manager]));

    assert!(matches!(workflow::resolve_time_off(&mut d.r, d.m[1], t.id, Decision::Approve), Err(WorkflowError::Forbidden)));
    let denied = workflow::resolve_time_off(&mut d.r, d.manager, t.id, Decision::Deny).unwrap();
    assert_eq!(denied.state, TimeOffState::Denied);
    assert_eq!(d.r.outbox.last().unwrap().notification.recipient, who);
    assert!(matches!(workflow::resolve_time_off(&mut d.r, d.manager, t.id, Decision::Approve), Err(WorkflowError::NotPending)));

    let at = ts("2021-09-09T08:00:00Z");
    assert!(matches!(workflow::request_time_off(&mut d.r, who, who, at, at, ""), Err(WorkflowError::EmptyInterval)));
    d.r.settings.self_time_off_enabled = false;
    assert!(matches!(workflow::request_time_off(&mut d.r, who, who, at, at.plus_minutes(60), ""), Err(WorkflowError::SelfEntryDisabled)));
    assert!(workflow::request_time_off(&mut d.r, d.manager, who, at, at.plus_minutes(60), "entered by manager").is_ok());
}

#[test]
fn approved_time_off_never_unassigns() {
    let mut d = Desk::new();
    let (a, b) = (d.m[0], d.m[1]);
    let id = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[a, b]);
    d.r.shifts.get_mut(&id).unwrap().min_staff = 2;
    workflow::request_time_off(&mut d.r, a, a, ts("2021-09-07T00:00:00Z"), ts("2021-09-08T00:00:00Z"), "sick").unwrap();
    assert!(d.r.shifts[&id].assignments.contains(&a));
    assert!(!engine::understaffed(&d.r.shifts[&id]));
}

#[test]
fn claim_rules() {
    let mut d = Desk::new();
    let open = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[]);
    let (shift, req) = workflow::claim_shift(&mut d.r, d.m[0], open, now()).unwrap();
    assert!(shift.assignments.contains(&d.m[0]));
    assert_eq!(req.state, RequestState::Completed);
    assert_eq!(d.r.outbox.iter().filter(|e| e.notification.template == notify::SHIFT_CLAIMED).count(), 1);
    assert!(matches!(workflow::claim_shift(&mut d.r, d.m[1], open, now()), Err(WorkflowError::NotUnderstaffed { .. })));

    // member already at the weekly cap: 38h worked, cap 40h, 3h shift
    let capped = d.m[2];
    d.r.accounts.get_mut(&capped).unwrap().quotas.max_hours_per_week = Some(40 * 60);
    for day in 13..18 {
        d.shift(&format!("2021-09-{day}T08:00:00Z"), &format!("2021-09-{day}T15:36:00Z"), &[capped]);
    }
    let extra = d.shift("2021-09-18T09:00:00Z", "2021-09-18T12:00:00Z", &[]);
    let err = workflow::claim_shift(&mut d.r, capped, extra, now()).unwrap_err();
    let WorkflowError::Engine(EngineError::QuotaRefused { violations }) = err else { panic!("{err:?}") };
    assert_eq!((violations[0].limit, violations[0].would_be), (2400, 38 * 60 + 180));

    d.r.schedules.get_mut(&d.s).unwrap().settings.claiming_enabled = false;
    assert!(matches!(workflow::claim_shift(&mut d.r, d.m[3], extra, now()), Err(WorkflowError::ClaimingDisabled)));
}

#[test]
fn give_up_flow() {
    let mut d = Desk::new();
    let (a, b, c) = (d.m[0], d.m[1], d.m[2]);
    let id = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[a]);
    d.shift("2021-09-07T10:00:00Z", "2021-09-07T11:00:00Z", &[c]);
    let before = d.r.outbox.len();
    let req = workflow::give_up_shift(&mut d.r, a, id, now()).unwrap();
    assert_eq!(req.state, RequestState::Open);
    assert!(d.r.shifts[&id].assignments.contains(&a));
    let offered: BTreeSet<AccountId> = d.r.outbox[before..].iter().map(|e| e.notification.recipient).collect();
    assert!(offered.contains(&b) && !offered.contains(&c) && !offered.contains(&a));
    assert!(matches!(workflow::give_up_shift(&mut d.r, a, id, now()), Err(WorkflowError::DuplicateRequest { .. })));

    assert!(matches!(workflow::accept_give_up(&mut d.r, b, req.id, Some(req.version + 1)), Err(WorkflowError::NotPending)));
    let done = workflow::accept_give_up(&mut d.r, b, req.id, Some(req.version)).unwrap();
    assert_eq!(done.state, RequestState::Completed);
    assert_eq!(done.counterparty, Some(b));
    assert_eq!(d.r.shifts[&id].assignments, BTreeSet::from([b]));
    assert!(matches!(workflow::accept_give_up(&mut d.r, d.m[3], req.id, None), Err(WorkflowError::NotPending)));

    let id2 = d.shift("2021-09-08T09:00:00Z", "2021-09-08T12:00:00Z", &[a]);
    let req2 = workflow::give_up_shift(&mut d.r, a, id2, now()).unwrap();
    let cancelled = workflow::cancel_request(&mut d.r, a, req2.id).unwrap();
    assert_eq!(cancelled.state, RequestState::Cancelled);
    assert!(d.r.shifts[&id2].assignments.contains(&a));
}

#[test]
fn drop_flow_is_atomic() {
    let mut d = Desk::new();
    let (a, b) = (d.m[0], d.m[1]);
    let id = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[a]);
    workflow::request_time_off(&mut d.r, b, b, ts("2021-09-07T00:00:00Z"), ts("2021-09-08T00:00:00Z"), "leave").unwrap();
    let before = d.snapshot();
    let err = workflow::drop_shift(&mut d.r, a, id, Some(b), now()).unwrap_err();
    assert!(matches!(err, WorkflowError::Engine(EngineError::ConflictRefused { .. })), "{err:?}");
    assert_eq!(d.snapshot(), before);

    let (shift, req) = workflow::drop_shift(&mut d.r, a, id, Some(d.m[2]), now()).unwrap();
    assert_eq!(shift.assignments, BTreeSet::from([d.m[2]]));
    assert_eq!(req.state, RequestState::Completed);

    let (shift, _) = workflow::drop_shift(&mut d.r, d.m[2], id, None, now()).unwrap();
    assert!(engine::understaffed(&shift));
    let dropped: Vec<AccountId> = d.r.outbox.iter().filter(|e| e.notification.template == notify::SHIFT_DROPPED).map(|e| e.notification.recipient).collect();
    assert!(!dropped.is_empty() && dropped.iter().all(|r| *r == d.manager));

    d.r.schedules.get_mut(&d.s).unwrap().settings.drop_enabled = false;
    let other = d.shift("2021-09-09T09:00:00Z", "2021-09-09T12:00:00Z", &[a]);
    assert!(matches!(workflow::drop_shift(&mut d.r, a, other, None, now()), Err(WorkflowError::DropDisabled)));
}

fn slot_counts(r: &Roster) -> Vec<(ShiftId, usize)> {
    r.shifts.values().map(|s| (s.id, s.assignments.len())).collect()
}

#[test]
fn swap_without_and_with_approval() {
    let mut d = Desk::new();
    let (a, b) = (d.m[0], d.m[1]);
    let sa = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[a]);
    let sb = d.shift("2021-09-08T09:00:00Z", "2021-09-08T12:00:00Z", &[b]);
    let counts = slot_counts(&d.r);
    let req = workflow::request_swap(&mut d.r, a, sa, b, Some(sb), now()).unwrap();
    assert_eq!(req.state, RequestState::Open);
    assert!(matches!(workflow::respond_swap(&mut d.r, d.m[2], req.id, true), Err(WorkflowError::Forbidden)));
    let done = workflow::respond_swap(&mut d.r, b, req.id, true).unwrap();
    assert_eq!(done.state, RequestState::Completed);
    assert_eq!(d.r.shifts[&sa].assignments, BTreeSet::from([b]));
    assert_eq!(d.r.shifts[&sb].assignments, BTreeSet::from([a]));
    assert_eq!(slot_counts(&d.r), counts);

    d.r.schedules.get_mut(&d.s).unwrap().settings.swap_requires_approval = true;
    let req = workflow::request_swap(&mut d.r, b, sa, a, None, now()).unwrap();
    let held = workflow::respond_swap(&mut d.r, a, req.id, true).unwrap();
    assert_eq!(held.state, RequestState::ApprovedPending);
    assert_eq!(d.r.shifts[&sa].assignments, BTreeSet::from([b]));
    assert!(matches!(workflow::resolve_swap(&mut d.r, d.m[3], req.id, true), Err(WorkflowError::Forbidden)));
    let rejected = workflow::resolve_swap(&mut d.r, d.manager, req.id, false).unwrap();
    assert_eq!(rejected.state, RequestState::Rejected);
    assert!(matches!(workflow::resolve_swap(&mut d.r, d.manager, req.id, true), Err(WorkflowError::NotPending)));

    let req = workflow::request_swap(&mut d.r, b, sa, a, None, now()).unwrap();
    workflow::respond_swap(&mut d.r, a, req.id, true).unwrap();
    let approved = workflow::resolve_swap(&mut d.r, d.manager, req.id, true).unwrap();
    assert_eq!(approved.state, RequestState::Completed);
    assert_eq!(d.r.shifts[&sa].assignments, BTreeSet::from([a]));

    let declined_req = workflow::request_swap(&mut d.r, a, sa, d.m[2], None, now()).unwrap();
    assert_eq!(workflow::respond_swap(&mut d.r, d.m[2], declined_req.id, false).unwrap().state, RequestState::Rejected);

    d.r.schedules.get_mut(&d.s).unwrap().settings.swap_enabled = false;
    assert!(matches!(workflow::request_swap(&mut d.r, a, sa, b, None, now()), Err(WorkflowError::SwapDisabled)));
}

#[test]
fn swap_counterparty_conflict_and_late_failure_rollback() {
    let mut d = Desk::new();
    let (a, b) = (d.m[0], d.m[1]);
    let sa = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[a]);
    d.shift("2021-09-07T11:00:00Z", "2021-09-07T13:00:00Z", &[b]);
    assert!(matches!(workflow::request_swap(&mut d.r, a, sa, b, None, now()), Err(WorkflowError::CounterpartyConflict { .. })));

    // feasible when proposed, infeasible when accepted
    let c = d.m[2];
    let sb = d.shift("2021-09-09T09:00:00Z", "2021-09-09T12:00:00Z", &[c]);
    let req = workflow::request_swap(&mut d.r, a, sa, c, Some(sb), now()).unwrap();
    d.shift("2021-09-09T10:00:00Z", "2021-09-09T11:00:00Z", &[a]);
    let before = d.snapshot();
    let err = workflow::respond_swap(&mut d.r, c, req.id, true).unwrap_err();
    assert!(matches!(err, WorkflowError::CounterpartyConflict { .. }), "{err:?}");
    assert_eq!(d.snapshot(), before);
    assert_eq!(d.r.requests[&req.id].state, RequestState::Open);
}

#[test]
fn injected_failure_leaves_roster_untouched() {
    let mut d = Desk::new();
    let id = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[]);
    let before = d.snapshot();
    let (m0, m1) = (d.m[0], d.m[1]);
    let out: Result<(), WorkflowError> = workflow::atomically(&mut d.r, |r| {
        engine::assign(r, m0, id, m0, false)?;
        engine::assign(r, m1, id, m1, false)?;
        Err(WorkflowError::Forbidden)
    });
    assert!(out.is_err());
    assert_eq!(d.snapshot(), before);
}

#[test]
fn terminal_transitions_notify_in_both_locales() {
    let mut d = Desk::new();
    let (a, b) = (d.m[0], d.m[1]);
    let s1 = d.shift("2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[a]);
    let s2 = d.shift("2021-09-08T09:00:00Z", "2021-09-08T12:00:00Z", &[]);
    let g = workflow::give_up_shift(&mut d.r, a, s1, now()).unwrap();
    workflow::accept_give_up(&mut d.r, b, g.id, None).unwrap();
    workflow::claim_shift(&mut d.r, a, s2, now()).unwrap();
    let sw = workflow::request_swap(&mut d.r, a, s2, d.m[2], None, now()).unwrap();
    workflow::respond_swap(&mut d.r, d.m[2], sw.id, false).unwrap();
    workflow::drop_shift(&mut d.r, a, s2, None, now()).unwrap();
    let templates: BTreeSet<&str> = d.r.outbox.iter().map(|e| e.notification.template.as_str()).collect();
    for t in [notify::GIVE_UP_COMPLETED, notify::SHIFT_CLAIMED, notify::SWAP_REJECTED, notify::SHIFT_DROPPED] {
        assert!(templates.contains(t), "{t}");
    }
    for e in &d.r.outbox {
        for locale in Locale::ALL {
            let (subject, body) = notify::render(locale, &e.notification.template, &e.notification.payload).unwrap();
            assert!(!subject.is_empty() && !body.is_empty());
        }
    }
    let mut sink = notify::MemorySink::default();
    let sent = notify::deliver_pending(&mut d.r, &mut sink).unwrap();
    assert_eq!(sent, sink.messages.len());
    assert!(sink.messages.iter().any(|m| m.to == "zoé@example.org"));
}

#[derive(Clone, Debug)]
enum Op {
    Claim(usize, usize),
    GiveUp(usize, usize),
    Accept(usize, usize),
    Drop(usize, usize, Option<usize>),
    Swap(usize, usize, usize),
    Respond(usize, bool),
    Resolve(usize, bool),
    Cancel(usize, usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..20, 0usize..40).prop_map(|(a, s)| Op::Claim(a, s)),
        (0usize..20, 0usize..40).prop_map(|(a, s)| Op::GiveUp(a, s)),
        (0usize..20, 0usize..40).prop_map(|(a, r)| Op::Accept(a, r)),
        (0usize..20, 0usize..40, prop::option::of(0usize..20)).prop_map(|(a, s, x)| Op::Drop(a, s, x)),
        (0usize..20, 0usize..40, 0usize..20).prop_map(|(a, s, b)| Op::Swap(a, s, b)),
        (0usize..40, any::<bool>()).prop_map(|(r, y)| Op::Respond(r, y)),
        (0usize..40, any::<bool>()).prop_map(|(r, y)| Op::Resolve(r, y)),
        (0usize..20, 0usize..40).prop_map(|(a, r)| Op::Cancel(a, r)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_workflows_keep_invariants_and_fail_cleanly(seed in 0u64..5000, ops in prop::collection::vec(op(), 1..25)) {
        let w = random_world(seed, &Knobs { shifts: 30, overlap_p: 0.0, ..Knobs::default() });
        let mut r = w.roster.clone();
        prop_assert!(r.check_invariants().is_empty(), "{:?}", r.check_invariants());
        let people: Vec<AccountId> = r.accounts.keys().copied().collect();
        let pick = |i: usize| people[i % people.len()];
        for op in ops {
            let shifts: Vec<ShiftId> = r.shifts.keys().copied().collect();
            let reqs: Vec<RequestId> = r.requests.keys().copied().collect();
            let sh = |i: usize| shifts[i % shifts.len()];
            let rq = |i: usize| reqs.get(i % reqs.len().max(1)).copied().unwrap_or(RequestId(0));
            let counts: u64 = r.shifts.values().map(|s| s.assignments.len() as u64).sum();
            let before = serde_json::to_vec(&r).unwrap();
            let swap_like = matches!(op, Op::Respond(..) | Op::Resolve(..));
            let result: Result<(), WorkflowError> = match op {
                Op::Claim(a, s) => workflow::claim_shift(&mut r, pick(a), sh(s), ts("2021-09-01T00:00:00Z")).map(|_| ()),
                Op::GiveUp(a, s) => workflow::give_up_shift(&mut r, pick(a), sh(s), ts("2021-09-01T00:00:00Z")).map(|_| ()),
                Op::Accept(a, q) => workflow::accept_give_up(&mut r, pick(a), rq(q), None).map(|_| ()),
                Op::Drop(a, s, x) => workflow::drop_shift(&mut r, pick(a), sh(s), x.map(pick), ts("2021-09-01T00:00:00Z")).map(|_| ()),
                Op::Swap(a, s, b) => workflow::request_swap(&mut r, pick(a), sh(s), pick(b), None, ts("2021-09-01T00:00:00Z")).map(|_| ()),
                Op::Respond(q, y) => {
                    let cp = r.requests.get(&rq(q)).and_then(|x| x.counterparty).unwrap_or(AccountId(0));
                    workflow::respond_swap(&mut r, cp, rq(q), y).map(|_| ())
                }
                Op::Resolve(q, y) => workflow::resolve_swap(&mut r, w.manager, rq(q), y).map(|_| ()),
                Op::Cancel(a, q) => workflow::cancel_request(&mut r, pick(a), rq(q)).map(|_| ()),
            };
            if result.is_err() {
                prop_assert_eq!(serde_json::to_vec(&r).unwrap(), before);
            } else if swap_like {
                let after: u64 = r.shifts.values().map(|s| s.assignments.len() as u64).sum();
                prop_assert_eq!(after, counts);
            }
            prop_assert!(r.check_invariants().is_empty(), "{:?}", r.check_invariants());
        }
    }
}
