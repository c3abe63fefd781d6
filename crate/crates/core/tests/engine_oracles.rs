use std::collections::BTreeMap;

use proptest::prelude::*;
use rosterd_core::engine::{self, AutoScheduleParams, ConflictReport};
use rosterd_core::model::*;
use rosterd_core::testkit::{oracle, random_world, Knobs, World};
use rosterd_core::time::{Interval, Timestamp};

fn engine_keys(reports: &[ConflictReport]) -> Vec<oracle::ConflictKey> {
    let mut out: Vec<oracle::ConflictKey> = reports
        .iter()
        .map(|r| {
            let uid = (r.kind == engine::ConflictKind::ExternalCalendarEvent)
                .then(|| r.other.rsplit_once('[').map(|(_, u)| u.trim_end_matches(']').to_string()).unwrap_or_default());
            (r.kind, r.shift, r.time_off, uid)
        })
        .collect();
    out.sort();
    out
}

fn probe_interval(world: &World, a: i64, len: i64) -> Interval {
    let start = world.range().to_interval(world.roster.settings.display_zone).start.plus_minutes(a);
    Interval::new(start, start.plus_minutes(len)).unwrap()
}

#[test]
fn conflicts_match_pairwise_oracle() {
    for seed in 0..150u64 {
        let w = random_world(seed, &Knobs { overlap_p: 0.5, ..Knobs::default() });
        let span = w.days * 1440;
        for k in 0..6i64 {
            let account = w.members[(seed as usize + k as usize) % w.members.len()];
            let schedule = w.schedules[k as usize % w.schedules.len()];
            let interval = probe_interval(&w, (seed as i64 * 977 + k * 4513) % span, 15 + (k * 131) % 600);
            let got = engine_keys(&engine::conflicts_for(&w.roster, account, schedule, &interval, None));
            let want = oracle::conflicts(&w.roster, account, schedule, &interval, None);
            assert_eq!(got, want, "seed {seed} probe {k}");
        }
    }
}

#[test]
fn conflict_symmetry_between_assignments() {
    for seed in 0..60u64 {
        let w = random_world(seed, &Knobs { overlap_p: 0.8, ..Knobs::default() });
        for a in &w.members {
            let mine: Vec<&Shift> = w.roster.assignments_of(*a).collect();
            for x in &mine {
                for y in &mine {
                    if x.id == y.id {
                        continue;
                    }
                    let xy = engine::assignment_overlaps(&w.roster, *a, x.schedule, &x.interval, Some(x.id)).iter().any(|r| r.shift == Some(y.id));
                    let yx = engine::assignment_overlaps(&w.roster, *a, y.schedule, &y.interval, Some(y.id)).iter().any(|r| r.shift == Some(x.id));
                    let raw = x.interval.start < y.interval.end && y.interval.start < x.interval.end;
                    assert_eq!(xy, yx);
                    assert_eq!(xy, raw);
                }
            }
        }
    }
}

#[test]
fn quotas_match_oracle() {
    for seed in 0..120u64 {
        let w = random_world(seed, &Knobs { quota_p: 1.0, ..Knobs::default() });
        let span = w.days * 1440;
        for (k, a) in w.members.iter().enumerate() {
            let interval = probe_interval(&w, (seed as i64 * 7919 + k as i64 * 1237) % span, 30 + (k as i64 * 97) % 480);
            let got = engine::check_quotas(&w.roster, *a, &interval);
            let blocking: std::collections::BTreeSet<QuotaKind> = got.iter().filter(|v| v.is_blocking()).map(|v| v.which).collect();
            let advisory = got.iter().any(|v| !v.is_blocking());
            let (want, under) = oracle::quota_breaches(&w.roster, *a, &interval);
            assert_eq!(blocking, want, "seed {seed} account {a}");
            assert_eq!(advisory, under, "seed {seed} account {a}");
        }
    }
}

#[test]
fn consecutive_days_mon_to_wed_then_thursday() {
    let mut w = random_world(1, &Knobs { shifts: 0, accounts: 1, anonymize_one: false, zone: Some(chrono_tz::UTC), ..Knobs::default() });
    let a = w.members[0];
    let s = w.schedules[0];
    w.roster.add_member(s, a).unwrap();
    w.roster.accounts.get_mut(&a).unwrap().quotas = QuotaSet { max_consecutive_days: Some(3), ..QuotaSet::default() };
    w.roster.accounts.get_mut(&a).unwrap().availability = AvailabilityGrid::always();
    w.roster.time_off.clear();
    w.roster.external_events.clear();
    for day in 6..9 {
        let start: Timestamp = format!("2021-09-{day:02}T09:00:00Z").parse().unwrap();
        let id = ShiftId(w.roster.allocate());
        let mut sh = Shift::new(id, s, "Desk", Interval::new(start, start.plus_minutes(60)).unwrap());
        sh.assignments.insert(a);
        w.roster.shifts.insert(id, sh);
    }
    let thu = Interval::new("2021-09-09T09:00:00Z".parse().unwrap(), "2021-09-09T10:00:00Z".parse().unwrap()).unwrap();
    let v = engine::check_quotas(&w.roster, a, &thu);
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].which, v[0].limit, v[0].would_be), (QuotaKind::MaxConsecutiveDays, 3, 4));
    assert!(oracle::quota_breaches(&w.roster, a, &thu).0.contains(&QuotaKind::MaxConsecutiveDays));
}

fn params_for(w: &World, seed: u64) -> AutoScheduleParams {
    let mut p = AutoScheduleParams::new(w.schedules.iter().copied(), w.range());
    p.max_shifts_per_day = seed.is_multiple_of(3).then_some(1 + (seed % 2) as u32);
    p.min_gap = (seed % 4 == 1).then_some(30 + (seed % 5) as u32 * 30);
    p.seed = seed;
    p
}

#[test]
fn autoschedule_is_feasible_maximal_and_deterministic() {
    for seed in 0..80u64 {
        let w = random_world(seed, &Knobs { shifts: 40, ..Knobs::default() });
        let params = params_for(&w, seed);
        let first = engine::plan_auto_schedule(&w.roster, w.manager, &params).unwrap();
        let second = engine::plan_auto_schedule(&w.roster, w.manager, &params).unwrap();
        assert_eq!(serde_json::to_vec(&first).unwrap(), serde_json::to_vec(&second).unwrap());

        let mut replay = w.roster.clone();
        for planned in &first.assignments {
            let shift = replay.shifts[&planned.shift].clone();
            assert!(oracle::passes(&replay, &shift, planned.account, params.max_shifts_per_day, params.min_gap), "seed {seed} {planned:?}");
            assert!(replay.schedules[&shift.schedule].members.contains(&planned.account));
            replay.shifts.get_mut(&planned.shift).unwrap().assignments.insert(planned.account);
        }
        assert!(replay.check_invariants().is_empty(), "seed {seed}: {:?}", replay.check_invariants());

        for unfilled in &first.unfilled {
            let shift = &replay.shifts[&unfilled.shift];
            if shift.is_full() {
                continue;
            }
            for m in &replay.schedules[&shift.schedule].members {
                let acc = &replay.accounts[m];
                let holds = shift.required_positions.is_empty() || acc.positions.iter().any(|p| shift.required_positions.contains(p));
                if shift.assignments.contains(m) || acc.anonymized || !holds {
                    continue;
                }
                assert!(!oracle::passes(&replay, shift, *m, params.max_shifts_per_day, params.min_gap), "seed {seed}: {m} could fill {}", shift.id);
            }
        }

        let mut applied = w.roster.clone();
        let outcome = engine::auto_schedule(&mut applied, w.manager, &params).unwrap();
        assert_eq!(outcome, first);
        let again = engine::plan_auto_schedule(&applied, w.manager, &params).unwrap();
        assert!(again.assignments.is_empty(), "seed {seed}: second run assigned {:?}", again.assignments);
    }
}

#[test]
fn anonymized_accounts_are_never_picked() {
    for seed in 0..40u64 {
        let w = random_world(seed, &Knobs { anonymize_one: false, ..Knobs::default() });
        let victim = w.members[seed as usize % w.members.len()];
        let mut r = w.roster.clone();
        r.anonymize_account(victim, Timestamp::from_minutes(0)).unwrap();
        let params = params_for(&w, seed);
        let out = engine::plan_auto_schedule(&r, w.manager, &params).unwrap();
        assert!(out.assignments.iter().all(|p| p.account != victim));
        for s in r.shifts.keys() {
            assert!(engine::eligible_accounts(&r, *s, false).unwrap().iter().all(|c| c.account != victim));
        }
    }
}

fn minutes_per_account(r: &Roster) -> BTreeMap<AccountId, i64> {
    let mut m = BTreeMap::new();
    for s in r.shifts.values() {
        for a in &s.assignments {
            *m.entry(*a).or_insert(0) += s.interval.minutes();
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_preserves_minutes_and_staffing(seed in 0u64..10_000, pick in 0usize..1000, frac in 1i64..99) {
        let w = random_world(seed, &Knobs { shifts: 20, ..Knobs::default() });
        let ids: Vec<ShiftId> = w.roster.shifts.keys().copied().collect();
        let id = ids[pick % ids.len()];
        let original = w.roster.shifts[&id].clone();
        prop_assume!(original.interval.minutes() >= 2);
        let at = original.interval.start.plus_minutes((original.interval.minutes() * frac / 100).clamp(1, original.interval.minutes() - 1));
        let mut r = w.roster.clone();
        let before = minutes_per_account(&r);
        let (a, b) = engine::split_shift(&mut r, w.manager, id, at).unwrap();
        prop_assert_eq!(minutes_per_account(&r), before);
        prop_assert!(!r.shifts.contains_key(&id));
        prop_assert_eq!(a.interval.start, original.interval.start);
        prop_assert_eq!(a.interval.end, at);
        prop_assert_eq!(b.interval.start, at);
        prop_assert_eq!(b.interval.end, original.interval.end);
        for part in [&a, &b] {
            prop_assert_eq!(&part.assignments, &original.assignments);
            prop_assert_eq!(part.min_staff, original.min_staff);
            prop_assert_eq!(part.max_staff, original.max_staff);
            prop_assert_eq!(&part.required_positions, &original.required_positions);
            prop_assert_eq!(&part.favorites, &original.favorites);
        }
        prop_assert!(matches!(engine::split_shift(&mut r, w.manager, a.id, a.interval.start), Err(engine::EngineError::SplitOutOfRange)));
    }

    #[test]
    fn assign_unassign_round_trip(seed in 0u64..10_000, pick in 0usize..1000) {
        let w = random_world(seed, &Knobs { overlap_p: 0.0, ..Knobs::default() });
        let ids: Vec<ShiftId> = w.roster.shifts.keys().copied().collect();
        let id = ids[pick % ids.len()];
        let candidates = engine::eligible_accounts(&w.roster, id, false).unwrap();
        let Some(c) = candidates.iter().find(|c| c.selectable) else { return Ok(()) };
        let mut r = w.roster.clone();
        let before = r.shifts[&id].clone();
        match engine::assign(&mut r, w.manager, id, c.account, false) {
            Ok(_) => {
                let after = engine::unassign(&mut r, id, c.account).unwrap();
                prop_assert_eq!(after, before);
                let again = engine::eligible_accounts(&r, id, false).unwrap();
                prop_assert!(again.iter().any(|x| x.account == c.account && x.selectable));
            }
            Err(engine::EngineError::MaxStaffReached { .. }) => {}
            Err(e) => prop_assert!(false, "selectable candidate refused: {e}"),
        }
    }

    #[test]
    fn eligible_ordering_and_filters(seed in 0u64..10_000, pick in 0usize..1000) {
        let w = random_world(seed, &Knobs::default());
        let ids: Vec<ShiftId> = w.roster.shifts.keys().copied().collect();
        let id = ids[pick % ids.len()];
        let shift = &w.roster.shifts[&id];
        let list = engine::eligible_accounts(&w.roster, id, false).unwrap();
        let keys: Vec<(bool, i64, AccountId)> = list.iter().map(|c| (!c.favorite, c.week_minutes, c.account)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        prop_assert_eq!(keys, sorted);
        for c in &list {
            let acc = &w.roster.accounts[&c.account];
            prop_assert!(w.roster.schedules[&shift.schedule].members.contains(&c.account));
            prop_assert!(shift.required_positions.is_empty() || acc.positions.iter().any(|p| shift.required_positions.contains(p)));
            let blocked = !c.conflicts.is_empty() || c.quota_violations.iter().any(|v| v.is_blocking());
            prop_assert_eq!(c.selectable, !blocked);
        }
    }
}
