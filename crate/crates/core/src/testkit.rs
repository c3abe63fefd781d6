//! Seeded random rosters and brute-force reference implementations used by
//! the test suites. Nothing here is used at runtime.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Timelike};
use chrono_tz::Tz;
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{RngExt, SeedableRng};

use crate::engine::ConflictKind;
use crate::model::*;
use crate::time::{DateRange, Interval, MinuteRange, Timestamp};

pub const ZONES: [Tz; 3] = [chrono_tz::UTC, chrono_tz::Europe::Brussels, chrono_tz::America::Montreal];

/// Monday of the first generated week.
pub fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 9, 6).expect("valid")
}

pub fn ts(s: &str) -> Timestamp {
    s.parse().expect("timestamp literal")
}

pub fn iv(a: &str, b: &str) -> Interval {
    Interval::new(ts(a), ts(b)).expect("interval literal")
}

pub fn range(s: &str) -> DateRange {
    s.parse().expect("date range literal")
}

#[derive(Clone, Debug)]
pub struct Knobs {
    pub accounts: usize,
    pub schedules: usize,
    pub shifts: usize,
    pub days: i64,
    /// Probability that an account carries quotas.
    pub quota_p: f64,
    pub availability_p: f64,
    pub time_off_per_account: usize,
    pub external_p: f64,
    /// Probability that a generated assignment is kept even when it overlaps.
    pub overlap_p: f64,
    pub pay_p: f64,
    pub anonymize_one: bool,
    pub zone: Option<Tz>,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            accounts: 12,
            schedules: 3,
            shifts: 60,
            days: 14,
            quota_p: 0.4,
            availability_p: 0.3,
            time_off_per_account: 1,
            external_p: 0.2,
            overlap_p: 0.2,
            pay_p: 0.7,
            anonymize_one: true,
            zone: None,
        }
    }
}

/// A generated roster together with handles to its parts.
#[derive(Clone, Debug)]
pub struct World {
    pub roster: Roster,
    pub admin: AccountId,
    pub members: Vec<AccountId>,
    pub schedules: Vec<ScheduleId>,
    pub positions: Vec<PositionId>,
    /// One account holding manage_shifts on every schedule.
    pub manager: AccountId,
    pub first_day: NaiveDate,
    pub days: i64,
}

impl World {
    pub fn range(&self) -> DateRange {
        DateRange::new(self.first_day, self.first_day + Duration::days(self.days)).expect("non-empty")
    }
}

const GIVEN: [&str; 10] = ["Marie", "Jean", "Zoé", "Luc", "Anaïs", "Omar", "Chloé", "Yann", "Inès", "Paul"];
const FAMILY: [&str; 8] = ["Dubois", "Martin", "Lefèvre", "O'Neil", "Nguyen", "Roy, Jr", "Tremblay", "Petit \"P\""];

fn random_quotas(rng: &mut StdRng) -> QuotaSet {
    let mut q = QuotaSet::default();
    if rng.random_bool(0.5) {
        q.max_hours_per_day = Some(rng.random_range(4..=10) * 60);
    }
    if rng.random_bool(0.5) {
        q.max_hours_per_week = Some(rng.random_range(10..=40) * 60);
    }
    if rng.random_bool(0.3) {
        q.max_hours_per_month = Some(rng.random_range(20..=120) * 60);
    }
    if rng.random_bool(0.4) {
        q.max_consecutive_days = Some(rng.random_range(1..=5));
    }
    if rng.random_bool(0.4) {
        q.max_consecutive_hours = Some(rng.random_range(3..=10) * 60);
    }
    if rng.random_bool(0.3) {
        let cap = q.max_hours_per_week.unwrap_or(2400);
        q.min_hours_per_week = Some(rng.random_range(60..=cap));
    }
    q
}

fn random_availability(rng: &mut StdRng) -> AvailabilityGrid {
    let days: [Vec<MinuteRange>; 7] = std::array::from_fn(|_| {
        if rng.random_bool(0.2) {
            return Vec::new();
        }
        let a = rng.random_range(0..16u16) * 60;
        let b = rng.random_range(a / 60 + 2..=24u16) * 60;
        let mut v = vec![MinuteRange::new(a, b.min(1440)).expect("ordered")];
        if b < 1380 && rng.random_bool(0.3) {
            v.push(MinuteRange::new(b + 30, 1440).expect("ordered"));
        }
        v
    });
    AvailabilityGrid::weekly(days)
}

fn local_ts(zone: Tz, date: NaiveDate, minute: u32) -> Timestamp {
    Timestamp::from_local(zone, date, NaiveTime::from_hms_opt(minute / 60, minute % 60, 0).expect("valid"))
}

/// Builds a roster from `seed`. Shifts respect membership, positions and
/// max staff; overlapping assignments appear with probability `overlap_p`.
pub fn random_world(seed: u64, knobs: &Knobs) -> World {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut r = Roster::new();
    let zone = knobs.zone.unwrap_or_else(|| *ZONES.choose(&mut rng).expect("non-empty"));
    r.settings.display_zone = zone;
    r.settings.time_off_requires_approval = rng.random_bool(0.5);

    let mut positions = Vec::new();
    for (i, name) in ["Student worker", "Librarian", "Technician"].iter().enumerate() {
        positions.push(r.add_position(name, (i == 0).then_some("#3366CC")).expect("fresh"));
    }
    let locations = [r.add_location("Main, north").expect("fresh"), r.add_location("Annex").expect("fresh")];

    let admin = AccountId(r.allocate());
    let mut a = Account::new(admin, "Ada", "Admin", "admin@example.org");
    a.role = Role::Admin;
    r.upsert_account(a).expect("valid admin");

    let manager = AccountId(r.allocate());
    r.upsert_account(Account::new(manager, "Max", "Manager", "manager@example.org")).expect("valid");

    let mut members = Vec::new();
    for i in 0..knobs.accounts {
        let id = AccountId(r.allocate());
        let mut acc = Account::new(id, GIVEN[i % GIVEN.len()], FAMILY[(i * 7 + seed as usize) % FAMILY.len()], &format!("user{i}@example.org"));
        for p in &positions {
            if rng.random_bool(0.5) {
                acc.positions.insert(*p);
            }
        }
        if rng.random_bool(knobs.quota_p) {
            acc.quotas = random_quotas(&mut rng);
        }
        if rng.random_bool(knobs.availability_p) {
            acc.availability = random_availability(&mut rng);
        }
        if rng.random_bool(knobs.pay_p) {
            acc.pay = Some(PayRates {
                regular_rate: rng.random_range(1000..3000),
                overtime_rate: rng.random_range(1500..4500),
                weekly_overtime_threshold: rng.random_range(4..=40) * 60 + rng.random_range(0..60),
            });
        }
        if rng.random_bool(0.3) {
            acc.color = Some(format!("#{:06X}", rng.random_range(0..0xFFFFFFu32)).parse().expect("hex"));
        }
        r.upsert_account(acc).expect("generated account is valid");
        members.push(id);
    }

    let mut schedules = Vec::new();
    for i in 0..knobs.schedules.max(1) {
        let loc = (i % 3 != 2).then_some(locations[i % 2]);
        let s = r.add_schedule(&format!("Service {}", char::from(b'A' + i as u8)), loc).expect("fresh");
        r.add_member(s, manager).expect("known");
        r.grant_rights(s, manager, ElevatedRights::FULL).expect("member");
        for m in &members {
            if rng.random_bool(0.6) {
                r.add_member(s, *m).expect("known");
            }
        }
        let sched = r.schedules.get_mut(&s).expect("added");
        sched.settings.swap_requires_approval = rng.random_bool(0.5);
        schedules.push(s);
    }

    for _ in 0..knobs.shifts {
        let sid = *schedules.choose(&mut rng).expect("non-empty");
        let date = base_date() + Duration::days(rng.random_range(0..knobs.days));
        let start_minute = rng.random_range(6 * 60..21 * 60);
        let length = rng.random_range(30..=600);
        let start = local_ts(zone, date, start_minute);
        let interval = Interval::new(start, start.plus_minutes(length)).expect("positive");
        let id = ShiftId(r.allocate());
        let mut shift = Shift::new(id, sid, &format!("Desk {}", id.0 % 5), interval);
        shift.min_staff = rng.random_range(0..=3);
        if rng.random_bool(0.3) {
            shift.max_staff = Some(rng.random_range(shift.min_staff.max(1)..=4));
        }
        if rng.random_bool(0.3) {
            shift.required_positions.insert(*positions.choose(&mut rng).expect("non-empty"));
        }
        shift.work_from_home = rng.random_bool(0.1);
        let pool: Vec<AccountId> = r.schedules[&sid].members.iter().copied().filter(|m| *m != manager).collect();
        for m in &pool {
            if rng.random_bool(0.2) {
                shift.favorites.insert(*m);
            }
        }
        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut rng);
        let want = rng.random_range(0..=shift.min_staff + 1);
        for m in shuffled {
            if shift.assignments.len() as u32 >= want || shift.is_full() {
                break;
            }
            let holds = shift.required_positions.is_empty() || r.accounts[&m].positions.iter().any(|p| shift.required_positions.contains(p));
            if !holds {
                continue;
            }
            let overlapping = r.assignments_of(m).any(|s| s.interval.overlaps(&interval));
            if overlapping && !rng.random_bool(knobs.overlap_p) {
                continue;
            }
            shift.assignments.insert(m);
        }
        r.shifts.insert(id, shift);
    }

    for m in &members {
        for _ in 0..knobs.time_off_per_account {
            if !rng.random_bool(0.5) {
                continue;
            }
            let date = base_date() + Duration::days(rng.random_range(0..knobs.days));
            let start = local_ts(zone, date, rng.random_range(0..20 * 60));
            let id = TimeOffId(r.allocate());
            let state = *[TimeOffState::Approved, TimeOffState::Pending, TimeOffState::Denied].choose(&mut rng).expect("non-empty");
            r.time_off.insert(
                id,
                TimeOff {
                    id,
                    account: *m,
                    interval: Interval::new(start, start.plus_minutes(rng.random_range(60..2880))).expect("positive"),
                    reason: "leave".into(),
                    state,
                    external_uid: None,
                },
            );
        }
        if rng.random_bool(knobs.external_p) {
            let date = base_date() + Duration::days(rng.random_range(0..knobs.days));
            let start = local_ts(zone, date, rng.random_range(7 * 60..18 * 60));
            r.external_events.insert(
                *m,
                vec![ExternalEvent { uid: format!("ext-{}", m.0), summary: "Meeting".into(), interval: Interval::new(start, start.plus_minutes(90)).expect("positive") }],
            );
        }
    }

    if knobs.anonymize_one && !members.is_empty() && rng.random_bool(0.5) {
        let victim = *members.choose(&mut rng).expect("non-empty");
        let now = local_ts(zone, base_date() + Duration::days(knobs.days / 2), 0);
        r.anonymize_account(victim, now).expect("fresh account");
    }

    World { roster: r, admin, members, schedules, positions, manager, first_day: base_date(), days: knobs.days }
}

// ---- oracles ----

pub mod oracle {
    use super::*;

    fn m(t: Timestamp) -> i64 {
        t.minutes_since_epoch()
    }

    fn overlap(a: &Interval, b: &Interval) -> bool {
        m(a.start) < m(b.end) && m(b.start) < m(a.end)
    }

    /// `(kind, shift, time_off, external uid)` for every collision, sorted.
    pub type ConflictKey = (ConflictKind, Option<ShiftId>, Option<TimeOffId>, Option<String>);

    /// Each assignment, approved time-off and external event checked pairwise
    /// against the proposal, and availability checked minute by minute.
    pub fn conflicts(roster: &Roster, account: AccountId, schedule: ScheduleId, interval: &Interval, exclude: Option<ShiftId>) -> Vec<ConflictKey> {
        let mut out = Vec::new();
        for s in roster.shifts.values() {
            if Some(s.id) == exclude || !s.assignments.contains(&account) {
                continue;
            }
            if overlap(&s.interval, interval) {
                let kind = if s.schedule == schedule { ConflictKind::OverlapSameSchedule } else { ConflictKind::OverlapOtherSchedule };
                out.push((kind, Some(s.id), None, None));
            }
        }
        for t in roster.time_off.values() {
            if t.account == account && t.state == TimeOffState::Approved && overlap(&t.interval, interval) {
                out.push((ConflictKind::TimeOffOverlap, None, Some(t.id), None));
            }
        }
        for e in roster.external_events.get(&account).into_iter().flatten() {
            if overlap(&e.interval, interval) {
                out.push((ConflictKind::ExternalCalendarEvent, None, None, Some(e.uid.clone())));
            }
        }
        if let Some(acc) = roster.accounts.get(&account) {
            if !available(&acc.availability, interval, roster.settings.display_zone) {
                out.push((ConflictKind::OutsideAvailability, None, None, None));
            }
        }
        out.sort();
        out
    }

    pub fn available(grid: &AvailabilityGrid, interval: &Interval, zone: Tz) -> bool {
        let Some(days) = &grid.weekly else { return true };
        (m(interval.start)..m(interval.end)).all(|minute| {
            let local = Timestamp::from_minutes(minute).local(zone);
            let wd = local.weekday().num_days_from_monday() as usize;
            let mod_ = (local.hour() * 60 + local.minute()) as u16;
            days[wd].iter().any(|r| r.start <= mod_ && mod_ < r.end)
        })
    }

    /// Quota kinds the proposal would break, plus whether the weekly
    /// minimum is undershot.
    pub fn quota_breaches(roster: &Roster, account: AccountId, proposed: &Interval) -> (BTreeSet<QuotaKind>, bool) {
        let mut broken = BTreeSet::new();
        let Some(acc) = roster.accounts.get(&account) else { return (broken, false) };
        let q = acc.quotas;
        let zone = roster.settings.display_zone;
        let mut all: Vec<Interval> = roster.shifts.values().filter(|s| s.assignments.contains(&account)).map(|s| s.interval).collect();
        all.push(*proposed);
        let day = |i: &Interval| i.start.local(zone).date_naive();
        let pday = day(proposed);
        let total = |f: &dyn Fn(NaiveDate) -> bool| -> i64 { all.iter().filter(|i| f(day(i))).map(|i| m(i.end) - m(i.start)).sum() };
        let check = |limit: Option<u32>, value: i64, kind: QuotaKind, broken: &mut BTreeSet<QuotaKind>| {
            if limit.is_some_and(|l| value > i64::from(l)) {
                broken.insert(kind);
            }
        };
        check(q.max_hours_per_day, total(&|d| d == pday), QuotaKind::MaxHoursPerDay, &mut broken);
        let week = (pday.iso_week().year(), pday.iso_week().week());
        let week_total = total(&|d| (d.iso_week().year(), d.iso_week().week()) == week);
        check(q.max_hours_per_week, week_total, QuotaKind::MaxHoursPerWeek, &mut broken);
        check(q.max_hours_per_month, total(&|d| (d.year(), d.month()) == (pday.year(), pday.month())), QuotaKind::MaxHoursPerMonth, &mut broken);

        if q.max_consecutive_days.is_some() {
            // day-occupancy bitmap around the proposal
            let lo = all.iter().map(day).min().expect("non-empty");
            let hi = all.iter().map(day).max().expect("non-empty");
            let n = (hi - lo).num_days() as usize + 1;
            let mut bits = vec![false; n];
            for i in &all {
                bits[(day(i) - lo).num_days() as usize] = true;
            }
            let p = (pday - lo).num_days() as usize;
            let mut run = 1;
            let mut k = p;
            while k > 0 && bits[k - 1] {
                run += 1;
                k -= 1;
            }
            k = p;
            while k + 1 < n && bits[k + 1] {
                run += 1;
                k += 1;
            }
            check(q.max_consecutive_days, run, QuotaKind::MaxConsecutiveDays, &mut broken);
        }

        if q.max_consecutive_hours.is_some() {
            let lo = all.iter().map(|i| m(i.start)).min().expect("non-empty");
            let hi = all.iter().map(|i| m(i.end)).max().expect("non-empty");
            let mut bits = vec![false; (hi - lo) as usize];
            for i in &all {
                for x in m(i.start)..m(i.end) {
                    bits[(x - lo) as usize] = true;
                }
            }
            let mut a = (m(proposed.start) - lo) as usize;
            let mut b = (m(proposed.end) - lo) as usize;
            while a > 0 && bits[a - 1] {
                a -= 1;
            }
            while b < bits.len() && bits[b] {
                b += 1;
            }
            check(q.max_consecutive_hours, (b - a) as i64, QuotaKind::MaxConsecutiveHours, &mut broken);
        }
        let under = q.min_hours_per_week.is_some_and(|min| week_total < i64::from(min));
        (broken, under)
    }

    /// Brute-force version of the auto-scheduler's per-candidate test.
    pub fn passes(roster: &Roster, shift: &Shift, account: AccountId, max_per_day: Option<u32>, min_gap: Option<u32>) -> bool {
        if !conflicts(roster, account, shift.schedule, &shift.interval, Some(shift.id)).is_empty() {
            return false;
        }
        if !quota_breaches(roster, account, &shift.interval).0.is_empty() {
            return false;
        }
        let zone = roster.settings.display_zone;
        let mine: Vec<&Shift> = roster.shifts.values().filter(|s| s.id != shift.id && s.assignments.contains(&account)).collect();
        if let Some(cap) = max_per_day {
            let d = shift.interval.start.local(zone).date_naive();
            if mine.iter().filter(|s| s.interval.start.local(zone).date_naive() == d).count() >= cap as usize {
                return false;
            }
        }
        if let Some(gap) = min_gap {
            for s in mine {
                let between = if overlap(&s.interval, &shift.interval) {
                    0
                } else {
                    (m(shift.interval.start) - m(s.interval.end)).max(m(s.interval.start) - m(shift.interval.end))
                };
                if between < i64::from(gap) {
                    return false;
                }
            }
        }
        true
    }

    /// Open minutes over the range, one 1440-slot bitmap per date.
    pub fn open_minutes(cal: &OpeningHoursCalendar, range: &DateRange) -> (u64, BTreeMap<Option<String>, u64>) {
        let mut total = 0;
        let mut per: BTreeMap<Option<String>, u64> = BTreeMap::new();
        let mut d = range.start;
        while d < range.end {
            let period = cal.periods.iter().find(|p| p.range.start <= d && d < p.range.end);
            let ranges: Vec<MinuteRange> = match cal.exceptions.get(&d) {
                Some(ex) => ex.clone(),
                None => period.map(|p| p.weekly[d.weekday().num_days_from_monday() as usize].clone()).unwrap_or_default(),
            };
            let mut slots = [false; 1440];
            for r in ranges {
                for s in &mut slots[r.start as usize..r.end as usize] {
                    *s = true;
                }
            }
            let n = slots.iter().filter(|x| **x).count() as u64;
            total += n;
            *per.entry(period.map(|p| p.name.clone())).or_default() += n;
            d += Duration::days(1);
        }
        (total, per)
    }

    /// Per account, exact (regular, overtime) cent-minutes summed over ISO
    /// weeks: min(worked, threshold) at the regular rate and the excess at
    /// the overtime rate. Counts every assignment whose local start date is
    /// in `range`.
    pub fn pay(roster: &Roster, range: &DateRange) -> BTreeMap<AccountId, (i64, i64)> {
        let zone = roster.settings.display_zone;
        let mut worked: BTreeMap<(AccountId, i32, u32), i64> = BTreeMap::new();
        for s in roster.shifts.values() {
            let d = s.interval.start.local(zone).date_naive();
            if !(range.start <= d && d < range.end) {
                continue;
            }
            for a in &s.assignments {
                *worked.entry((*a, d.iso_week().year(), d.iso_week().week())).or_default() += m(s.interval.end) - m(s.interval.start);
            }
        }
        let mut out: BTreeMap<AccountId, (i64, i64)> = BTreeMap::new();
        for ((a, _, _), w) in worked {
            let Some(p) = roster.accounts.get(&a).and_then(|x| x.pay) else { continue };
            let th = i64::from(p.weekly_overtime_threshold);
            let e = out.entry(a).or_default();
            e.0 += w.min(th) * p.regular_rate;
            e.1 += (w - th).max(0) * p.overtime_rate;
        }
        out
    }

    /// Every (account, shift, time-off) triple by triple loop.
    pub fn overlap_triples(roster: &Roster) -> Vec<(AccountId, ShiftId, TimeOffId)> {
        let mut out = Vec::new();
        for a in roster.accounts.keys() {
            for s in roster.shifts.values() {
                for t in roster.time_off.values() {
                    if s.assignments.contains(a) && t.account == *a && t.state == TimeOffState::Approved && overlap(&s.interval, &t.interval) {
                        out.push((*a, s.id, t.id));
                    }
                }
            }
        }
        out.sort();
        out
    }
}
