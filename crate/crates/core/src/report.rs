//! Hours and pay aggregation, and CSV rendering.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AccountId, LocationId, PositionId, Roster, ScheduleId, Shift, ShiftId};
use crate::rights;
use crate::time::{iso_week_label, DateRange, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Account,
    Schedule,
    Position,
    Location,
    Day,
    Week,
    Month,
}

impl GroupBy {
    pub const ALL: [GroupBy; 7] = [GroupBy::Account, GroupBy::Schedule, GroupBy::Position, GroupBy::Location, GroupBy::Day, GroupBy::Week, GroupBy::Month];

    pub fn as_str(&self) -> &'static str {
        match self {
            GroupBy::Account => "account",
            GroupBy::Schedule => "schedule",
            GroupBy::Position => "position",
            GroupBy::Location => "location",
            GroupBy::Day => "day",
            GroupBy::Week => "week",
            GroupBy::Month => "month",
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupBy::ALL.into_iter().find(|g| g.as_str() == s.trim()).ok_or_else(|| format!("unknown group-by key {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportQuery {
    /// Empty means every schedule.
    #[serde(default)]
    pub schedules: BTreeSet<ScheduleId>,
    /// Empty means every account, plus unassigned shifts.
    #[serde(default)]
    pub accounts: BTreeSet<AccountId>,
    pub date_range: DateRange,
    #[serde(default)]
    pub group_by: Vec<GroupBy>,
    #[serde(default)]
    pub include_pay: bool,
}

impl ReportQuery {
    pub fn new(date_range: DateRange) -> Self {
        Self { schedules: BTreeSet::new(), accounts: BTreeSet::new(), date_range, group_by: Vec::new(), include_pay: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum ReportError {
    #[error("forbidden")]
    Forbidden,
    #[error("unknown schedule {id}")]
    UnknownSchedule { id: ScheduleId },
    #[error("group-by key {key} given twice")]
    DuplicateGroupBy { key: GroupBy },
}

/// A typed group key component. Rows sort by these, not by their labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupValue {
    Account(Option<AccountId>),
    Schedule(ScheduleId),
    Position(Option<PositionId>),
    Location(Option<LocationId>),
    Day(NaiveDate),
    /// Monday of the ISO week.
    Week(NaiveDate),
    Month(i32, u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    #[serde(skip)]
    pub key: Vec<GroupValue>,
    /// Rendered group key, one entry per group-by column.
    pub group: Vec<String>,
    pub shift_count: u64,
    pub total_minutes: i64,
    pub understaffed_count: u64,
    /// Cents, rounded half-up.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regular_pay: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overtime_pay: Option<i64>,
    /// Exact pay in cent-minutes (cents per hour times minutes); divide by 60 for cents.
    #[serde(skip)]
    pub regular_pay_exact: i64,
    #[serde(skip)]
    pub overtime_pay_exact: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub group_by: Vec<GroupBy>,
    pub include_pay: bool,
    pub rows: Vec<ReportRow>,
}

/// Cent-minutes to cents, rounding half-up.
pub fn cents(exact: i64) -> i64 {
    (exact + 30).div_euclid(60)
}

pub fn format_cents(c: i64) -> String {
    let sign = if c < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", c.abs() / 100, c.abs() % 100)
}

/// One (shift, assignee) pair, or an unassigned shift.
#[derive(Clone, Debug)]
struct Unit {
    shift: ShiftId,
    minutes: i64,
    regular: i64,
    overtime: i64,
    understaffed: bool,
    key: Vec<GroupValue>,
}

fn monday(date: NaiveDate) -> NaiveDate {
    date - Duration::days(i64::from(date.weekday().num_days_from_monday()))
}

fn authorize(roster: &Roster, caller: AccountId, schedules: &BTreeSet<ScheduleId>) -> Result<(), ReportError> {
    if rights::is_admin(roster, caller) {
        return Ok(());
    }
    if schedules.iter().all(|s| rights::can_view_stats(roster, caller, *s)) {
        Ok(())
    } else {
        Err(ReportError::Forbidden)
    }
}

/// Offset of each (account, shift) pair within the account's ISO week,
/// counting every assignment across all schedules in start order.
fn week_offsets(roster: &Roster, accounts: &BTreeSet<AccountId>) -> HashMap<(AccountId, ShiftId), i64> {
    let zone = roster.settings.display_zone;
    let mut out = HashMap::new();
    for account in accounts {
        let mut by_week: BTreeMap<NaiveDate, Vec<&Shift>> = BTreeMap::new();
        for s in roster.assignments_of(*account) {
            by_week.entry(monday(s.interval.start.local_date(zone))).or_default().push(s);
        }
        for shifts in by_week.values_mut() {
            shifts.sort_by_key(|s| (s.interval.start, s.id));
            let mut cumulative = 0;
            for s in shifts.iter() {
                out.insert((*account, s.id), cumulative);
                cumulative += s.interval.minutes();
            }
        }
    }
    out
}

fn span_overlap(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0)
}

fn key_for(roster: &Roster, group_by: &[GroupBy], shift: &Shift, account: Option<AccountId>) -> Vec<GroupValue> {
    let zone = roster.settings.display_zone;
    let day = shift.interval.start.local_date(zone);
    group_by
        .iter()
        .map(|g| match g {
            GroupBy::Account => GroupValue::Account(account),
            GroupBy::Schedule => GroupValue::Schedule(shift.schedule),
            GroupBy::Position => {
                let held = account.and_then(|a| roster.accounts.get(&a)).map(|a| &a.positions);
                let pick = held.and_then(|held| shift.required_positions.intersection(held).next().copied());
                GroupValue::Position(pick)
            }
            GroupBy::Location => GroupValue::Location(roster.schedules.get(&shift.schedule).and_then(|s| s.location)),
            GroupBy::Day => GroupValue::Day(day),
            GroupBy::Week => GroupValue::Week(monday(day)),
            GroupBy::Month => GroupValue::Month(day.year(), day.month()),
        })
        .collect()
}

pub fn render_value(roster: &Roster, value: &GroupValue) -> String {
    match value {
        GroupValue::Account(Some(a)) => roster.account_label(*a),
        GroupValue::Schedule(s) => roster.schedules.get(s).map(|s| s.name.clone()).unwrap_or_else(|| s.to_string()),
        GroupValue::Position(Some(p)) => roster.positions.get(p).map(|p| p.name.clone()).unwrap_or_else(|| p.to_string()),
        GroupValue::Location(Some(l)) => roster.locations.get(l).map(|l| l.name.clone()).unwrap_or_else(|| l.to_string()),
        GroupValue::Account(None) | GroupValue::Position(None) | GroupValue::Location(None) => String::new(),
        GroupValue::Day(d) => d.to_string(),
        GroupValue::Week(d) => iso_week_label(d.iso_week()),
        GroupValue::Month(y, m) => format!("{y:04}-{m:02}"),
    }
}

fn units(roster: &Roster, query: &ReportQuery) -> Vec<Unit> {
    let zone = roster.settings.display_zone;
    let window: Interval = query.date_range.to_interval(zone);
    let shifts: Vec<&Shift> = roster
        .shifts
        .values()
        .filter(|s| query.schedules.is_empty() || query.schedules.contains(&s.schedule))
        .filter(|s| s.interval.overlaps(&window))
        .collect();
    let payees: BTreeSet<AccountId> = if query.include_pay {
        shifts.iter().flat_map(|s| s.assignments.iter().copied()).filter(|a| query.accounts.is_empty() || query.accounts.contains(a)).collect()
    } else {
        BTreeSet::new()
    };
    let offsets = week_offsets(roster, &payees);
    let mut out = Vec::new();
    for shift in shifts {
        let minutes = shift.interval.overlap_minutes(&window);
        let understaffed = shift.is_understaffed();
        if shift.assignments.is_empty() {
            if query.accounts.is_empty() {
                out.push(Unit { shift: shift.id, minutes: 0, regular: 0, overtime: 0, understaffed, key: key_for(roster, &query.group_by, shift, None) });
            }
            continue;
        }
        for account in &shift.assignments {
            if !query.accounts.is_empty() && !query.accounts.contains(account) {
                continue;
            }
            let (mut regular, mut overtime) = (0, 0);
            if query.include_pay {
                if let Some(pay) = roster.accounts.get(account).and_then(|a| a.pay) {
                    let start = offsets.get(&(*account, shift.id)).copied().unwrap_or(0)
                        + (shift.interval.start.max(window.start).minutes_since_epoch() - shift.interval.start.minutes_since_epoch());
                    let span = (start, start + minutes);
                    let threshold = i64::from(pay.weekly_overtime_threshold);
                    let regular_minutes = span_overlap(span, (0, threshold));
                    regular = regular_minutes * pay.regular_rate;
                    overtime = (minutes - regular_minutes) * pay.overtime_rate;
                }
            }
            out.push(Unit {
                shift: shift.id,
                minutes,
                regular,
                overtime,
                understaffed,
                key: key_for(roster, &query.group_by, shift, Some(*account)),
            });
        }
    }
    out
}

/// Aggregates assignment minutes (and pay) over the query.
///
/// Overtime is allocated per account and ISO week in start order over all
/// of the account's assignments, so a row's pay does not depend on how the
/// report is grouped.
pub fn run_report(roster: &Roster, caller: AccountId, query: &ReportQuery) -> Result<Report, ReportError> {
    for s in &query.schedules {
        if !roster.schedules.contains_key(s) {
            return Err(ReportError::UnknownSchedule { id: *s });
        }
    }
    let mut seen = BTreeSet::new();
    for g in &query.group_by {
        if !seen.insert(*g) {
            return Err(ReportError::DuplicateGroupBy { key: *g });
        }
    }
    let scope: BTreeSet<ScheduleId> = if query.schedules.is_empty() { roster.schedules.keys().copied().collect() } else { query.schedules.clone() };
    authorize(roster, caller, &scope)?;

    struct Acc {
        shifts: BTreeSet<ShiftId>,
        understaffed: BTreeSet<ShiftId>,
        minutes: i64,
        regular: i64,
        overtime: i64,
    }
    let mut groups: BTreeMap<Vec<GroupValue>, Acc> = BTreeMap::new();
    if query.group_by.is_empty() {
        groups.insert(Vec::new(), Acc { shifts: BTreeSet::new(), understaffed: BTreeSet::new(), minutes: 0, regular: 0, overtime: 0 });
    }
    for u in units(roster, query) {
        let acc = groups.entry(u.key).or_insert_with(|| Acc { shifts: BTreeSet::new(), understaffed: BTreeSet::new(), minutes: 0, regular: 0, overtime: 0 });
        acc.shifts.insert(u.shift);
        if u.understaffed {
            acc.understaffed.insert(u.shift);
        }
        acc.minutes += u.minutes;
        acc.regular += u.regular;
        acc.overtime += u.overtime;
    }
    let rows = groups
        .into_iter()
        .map(|(key, acc)| ReportRow {
            group: key.iter().map(|v| render_value(roster, v)).collect(),
            key,
            shift_count: acc.shifts.len() as u64,
            total_minutes: acc.minutes,
            understaffed_count: acc.understaffed.len() as u64,
            regular_pay: query.include_pay.then(|| cents(acc.regular)),
            overtime_pay: query.include_pay.then(|| cents(acc.overtime)),
            regular_pay_exact: acc.regular,
            overtime_pay_exact: acc.overtime,
        })
        .collect();
    Ok(Report { group_by: query.group_by.clone(), include_pay: query.include_pay, rows })
}

impl Report {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.group_by.iter().map(|g| g.as_str().to_string()).collect();
        h.extend(["shift_count", "total_minutes", "understaffed_count"].map(String::from));
        if self.include_pay {
            h.extend(["regular_pay", "overtime_pay"].map(String::from));
        }
        h
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut rec = r.group.clone();
                rec.push(r.shift_count.to_string());
                rec.push(r.total_minutes.to_string());
                rec.push(r.understaffed_count.to_string());
                if self.include_pay {
                    rec.push(format_cents(r.regular_pay.unwrap_or(0)));
                    rec.push(format_cents(r.overtime_pay.unwrap_or(0)));
                }
                rec
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        write_csv(&self.header(), &self.records())
    }
}

fn push_field(out: &mut String, field: &str) {
    if field.contains([',', '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(field);
    }
}

/// RFC 4180 text with LF line endings; fields are quoted only when needed.
pub fn write_csv(header: &[String], records: &[Vec<String>]) -> String {
    let mut out = String::new();
    for rec in std::iter::once(header).chain(records.iter().map(Vec::as_slice)) {
        for (i, field) in rec.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_field(&mut out, field);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Account, PayRates, Role};
    use crate::time::Timestamp;

    fn setup(rates: PayRates) -> (Roster, AccountId, AccountId, ScheduleId) {
        let mut r = Roster::new();
        let admin = AccountId(r.allocate());
        let mut a = Account::new(admin, "Ad", "Min", "admin@x.org");
        a.role = Role::Admin;
        r.upsert_account(a).unwrap();
        let s = r.add_schedule("Desk", None).unwrap();
        let w = AccountId(r.allocate());
        let mut acc = Account::new(w, "Marie", "Dubois", "m@x.org");
        acc.pay = Some(rates);
        r.upsert_account(acc).unwrap();
        r.add_member(s, w).unwrap();
        (r, admin, w, s)
    }

    fn add(r: &mut Roster, s: ScheduleId, who: AccountId, start: &str, minutes: i64) {
        let start: Timestamp = start.parse().unwrap();
        let id = ShiftId(r.allocate());
        let mut shift = Shift::new(id, s, "Desk", Interval::new(start, start.plus_minutes(minutes)).unwrap());
        shift.assignments.insert(who);
        r.shifts.insert(id, shift);
    }

    #[test]
    fn below_threshold_is_all_regular() {
        let (mut r, admin, w, s) = setup(PayRates { regular_rate: 1000, overtime_rate: 1500, weekly_overtime_threshold: 2400 });
        add(&mut r, s, w, "2021-09-06T09:00:00Z", 480);
        let mut q = ReportQuery::new("2021-09-06..2021-09-13".parse().unwrap());
        q.include_pay = true;
        let rep = run_report(&r, admin, &q).unwrap();
        assert_eq!(rep.rows[0].regular_pay, Some(8000));
        assert_eq!(rep.rows[0].overtime_pay, Some(0));
    }

    #[test]
    fn forty_five_hours_split_at_threshold() {
        let (mut r, admin, w, s) = setup(PayRates { regular_rate: 1000, overtime_rate: 1500, weekly_overtime_threshold: 2400 });
        for day in 0..5 {
            add(&mut r, s, w, &format!("2021-09-{:02}T08:00:00Z", 6 + day), 540);
        }
        let mut q = ReportQuery::new("2021-09-06..2021-09-13".parse().unwrap());
        q.include_pay = true;
        q.group_by = vec![GroupBy::Account];
        let rep = run_report(&r, admin, &q).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].total_minutes, 2700);
        assert_eq!(rep.rows[0].regular_pay, Some(40000));
        assert_eq!(rep.rows[0].overtime_pay, Some(7500));
        assert_eq!(rep.to_csv(), "account,shift_count,total_minutes,understaffed_count,regular_pay,overtime_pay\nMarie Dubois,5,2700,0,400.00,75.00\n");
    }

    #[test]
    fn csv_quotes_only_when_needed() {
        let csv = write_csv(&["a".into(), "b".into()], &[vec!["x,y".into(), "plain".into()], vec!["say \"hi\"".into(), "two\nlines".into()]]);
        assert_eq!(csv, "a,b\n\"x,y\",plain\n\"say \"\"hi\"\"\",\"two\nlines\"\n");
        assert_eq!(write_csv(&["only".into()], &[]), "only\n");
    }

    #[test]
    fn stats_require_grant() {
        let (r, _, w, s) = setup(PayRates { regular_rate: 0, overtime_rate: 0, weekly_overtime_threshold: 1 });
        let mut q = ReportQuery::new("2021-09-06..2021-09-13".parse().unwrap());
        q.schedules.insert(s);
        assert_eq!(run_report(&r, w, &q), Err(ReportError::Forbidden));
        q.group_by = vec![GroupBy::Day, GroupBy::Day];
        assert!(matches!(run_report(&r, w, &q), Err(ReportError::DuplicateGroupBy { .. })));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(cents(29), 0);
        assert_eq!(cents(30), 1);
        assert_eq!(cents(89), 1);
        assert_eq!(cents(90), 2);
        assert_eq!(format_cents(47500), "475.00");
        assert_eq!(format_cents(5), "0.05");
    }
}
