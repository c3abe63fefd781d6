use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::account::{Account, Color, QuotaKind};
use super::exchange::ExchangeRequest;
use super::ids::*;
use super::notice::{Announcement, ExternalEvent, OutboxEntry};
use super::opening::OpeningHoursCalendar;
use super::org::{Department, Location, Position, Schedule};
use super::settings::SystemSettings;
use super::shift::Shift;
use super::timeoff::TimeOff;
use crate::time::{normalize_ranges, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum DomainError {
    #[error("email {email} is already used by another account")]
    DuplicateEmail { email: String },
    #[error("malformed color {value:?}")]
    MalformedColor { value: String },
    #[error("min_hours_per_week ({min}) exceeds max_hours_per_week ({max})")]
    QuotaInconsistent { min: u32, max: u32 },
    #[error("quota {which} must be strictly positive")]
    QuotaNotPositive { which: String },
    #[error("availability on weekday {weekday} has overlapping ranges")]
    OverlappingAvailability { weekday: usize },
    #[error("pay rates must be non-negative with a positive weekly threshold")]
    BadPayRates,
    #[error("{field} must not be empty")]
    EmptyField { field: String },
    #[error("unknown account {id}")]
    UnknownAccount { id: AccountId },
    #[error("unknown position {id}")]
    UnknownPosition { id: PositionId },
    #[error("unknown department {id}")]
    UnknownDepartment { id: DepartmentId },
    #[error("unknown location {id}")]
    UnknownLocation { id: LocationId },
    #[error("unknown schedule {id}")]
    UnknownSchedule { id: ScheduleId },
    #[error("account {id} is already anonymized")]
    AlreadyAnonymized { id: AccountId },
    #[error("a {kind} named {name:?} already exists")]
    DuplicateName { kind: String, name: String },
    #[error("account {account} is not a member of schedule {schedule}")]
    NotMember { account: AccountId, schedule: ScheduleId },
    #[error("view_stats and approve_time_off require manage_shifts")]
    CascadeViolation,
    #[error("default_dashboard_days must be at least 1")]
    BadDashboardDays,
    #[error("opening hours are inconsistent: {detail}")]
    BadOpeningHours { detail: String },
}

/// Credentials held by the local authentication provider.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthTable {
    /// PHC-format password hashes.
    #[serde(default)]
    pub password_hashes: BTreeMap<AccountId, String>,
    /// SHA-256 hex digest of long-lived API tokens.
    #[serde(default)]
    pub api_tokens: BTreeMap<String, AccountId>,
}

/// The complete data set of one deployment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    #[serde(default)]
    pub settings: SystemSettings,
    #[serde(default)]
    pub opening_hours: OpeningHoursCalendar,
    #[serde(default)]
    pub accounts: BTreeMap<AccountId, Account>,
    #[serde(default)]
    pub locations: BTreeMap<LocationId, Location>,
    #[serde(default)]
    pub departments: BTreeMap<DepartmentId, Department>,
    #[serde(default)]
    pub positions: BTreeMap<PositionId, Position>,
    #[serde(default)]
    pub schedules: BTreeMap<ScheduleId, Schedule>,
    #[serde(default)]
    pub shifts: BTreeMap<ShiftId, Shift>,
    #[serde(default)]
    pub time_off: BTreeMap<TimeOffId, TimeOff>,
    #[serde(default)]
    pub requests: BTreeMap<RequestId, ExchangeRequest>,
    #[serde(default)]
    pub announcements: BTreeMap<AnnouncementId, Announcement>,
    #[serde(default)]
    pub external_events: BTreeMap<AccountId, Vec<ExternalEvent>>,
    /// Deleted accounts whose past assignments are kept under a token.
    #[serde(default)]
    pub tombstones: BTreeMap<AccountId, String>,
    #[serde(default)]
    pub outbox: Vec<OutboxEntry>,
    #[serde(default)]
    pub auth: AuthTable,
    #[serde(default)]
    pub next_id: u64,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    /// Allocates a fresh identifier, unique across every entity kind.
    pub fn allocate(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    pub fn account(&self, id: AccountId) -> Result<&Account, DomainError> {
        self.accounts.get(&id).ok_or(DomainError::UnknownAccount { id })
    }

    pub fn schedule(&self, id: ScheduleId) -> Result<&Schedule, DomainError> {
        self.schedules.get(&id).ok_or(DomainError::UnknownSchedule { id })
    }

    pub fn account_by_email(&self, email: &str) -> Option<&Account> {
        self.accounts.values().find(|a| !a.anonymized && a.email.eq_ignore_ascii_case(email))
    }

    /// Display label for an account id, including deleted or anonymized ones.
    pub fn account_label(&self, id: AccountId) -> String {
        if let Some(account) = self.accounts.get(&id) {
            return account.display_name();
        }
        self.tombstones.get(&id).cloned().unwrap_or_else(|| format!("account-{id}"))
    }

    /// Every shift the account is assigned to, across all schedules.
    pub fn assignments_of(&self, account: AccountId) -> impl Iterator<Item = &Shift> {
        self.shifts.values().filter(move |s| s.assignments.contains(&account))
    }

    /// Checks an account draft, returning the normalized record or every
    /// violated invariant.
    pub fn validate_account(&self, mut draft: Account) -> Result<Account, Vec<DomainError>> {
        let mut errors = Vec::new();
        if !draft.anonymized {
            draft.email = draft.email.trim().to_string();
            if draft.email.is_empty() {
                errors.push(DomainError::EmptyField { field: "email".into() });
            } else if self.accounts.values().any(|a| a.id != draft.id && !a.anonymized && a.email.eq_ignore_ascii_case(&draft.email)) {
                errors.push(DomainError::DuplicateEmail { email: draft.email.clone() });
            }
        }
        if let Some(color) = &draft.color {
            // re-parse to normalize case
            match color.as_str().parse::<Color>() {
                Ok(c) => draft.color = Some(c),
                Err(_) => errors.push(DomainError::MalformedColor { value: color.to_string() }),
            }
        }
        for kind in QuotaKind::ALL {
            if draft.quotas.get(kind) == Some(0) {
                errors.push(DomainError::QuotaNotPositive { which: kind.as_str().into() });
            }
        }
        if let (Some(min), Some(max)) = (draft.quotas.min_hours_per_week, draft.quotas.max_hours_per_week) {
            if min > max {
                errors.push(DomainError::QuotaInconsistent { min, max });
            }
        }
        if let Some(days) = &mut draft.availability.weekly {
            for (weekday, day) in days.iter_mut().enumerate() {
                if normalize_ranges(day).is_err() {
                    errors.push(DomainError::OverlappingAvailability { weekday });
                }
            }
        }
        if let Some(pay) = &draft.pay {
            if pay.regular_rate < 0 || pay.overtime_rate < 0 || pay.weekly_overtime_threshold == 0 {
                errors.push(DomainError::BadPayRates);
            }
        }
        for id in &draft.positions {
            if !self.positions.contains_key(id) {
                errors.push(DomainError::UnknownPosition { id: *id });
            }
        }
        for id in &draft.departments {
            if !self.departments.contains_key(id) {
                errors.push(DomainError::UnknownDepartment { id: *id });
            }
        }
        for id in &draft.locations {
            if !self.locations.contains_key(id) {
                errors.push(DomainError::UnknownLocation { id: *id });
            }
        }
        if errors.is_empty() {
            Ok(draft)
        } else {
            Err(errors)
        }
    }

    /// Validates and stores an account (insert or replace).
    pub fn upsert_account(&mut self, draft: Account) -> Result<AccountId, Vec<DomainError>> {
        if let Some(existing) = self.accounts.get(&draft.id) {
            if existing.anonymized {
                return Err(vec![DomainError::AlreadyAnonymized { id: draft.id }]);
            }
        }
        let account = self.validate_account(draft)?;
        let id = account.id;
        self.accounts.insert(id, account);
        Ok(id)
    }

    /// Sets `color` on every account holding `position`. Returns how many
    /// accounts were written, including ones that already had the color.
    pub fn apply_position_color(&mut self, position: PositionId, color: &str) -> Result<usize, DomainError> {
        if !self.positions.contains_key(&position) {
            return Err(DomainError::UnknownPosition { id: position });
        }
        let color: Color = color.parse().map_err(|_| DomainError::MalformedColor { value: color.to_string() })?;
        let mut updated = 0;
        for account in self.accounts.values_mut().filter(|a| a.positions.contains(&position) && !a.anonymized) {
            account.color = Some(color.clone());
            updated += 1;
        }
        Ok(updated)
    }

    /// Irreversibly replaces the personal fields of an account with one
    /// opaque token. Past assignments stay under the token; assignments
    /// starting at or after `now` are released and the account leaves every
    /// schedule.
    pub fn anonymize_account(&mut self, id: AccountId, now: Timestamp) -> Result<Account, DomainError> {
        let account = self.accounts.get(&id).ok_or(DomainError::UnknownAccount { id })?;
        if account.anonymized {
            return Err(DomainError::AlreadyAnonymized { id });
        }
        let needles: Vec<String> = [account.given_name.clone(), account.family_name.clone(), account.email.clone(), account.display_name()]
            .into_iter()
            .filter(|s| !s.trim().is_empty())
            .collect();
        let token = format!("anon-{:06}", self.allocate());
        let account = self.accounts.get_mut(&id).expect("checked above");
        account.given_name = token.clone();
        account.family_name = token.clone();
        account.email = token.clone();
        account.color = None;
        account.pay = None;
        account.anonymized = true;
        let result = account.clone();
        self.release_account(id, now);
        self.scrub_text(&needles, &token);
        self.auth.password_hashes.remove(&id);
        self.auth.api_tokens.retain(|_, owner| *owner != id);
        self.external_events.remove(&id);
        Ok(result)
    }

    /// Removes an account. Future assignments are released; past ones are
    /// re-pointed to a tombstone token.
    pub fn delete_account(&mut self, id: AccountId, now: Timestamp) -> Result<String, DomainError> {
        let account = self.accounts.get(&id).ok_or(DomainError::UnknownAccount { id })?;
        let needles: Vec<String> = [account.given_name.clone(), account.family_name.clone(), account.email.clone(), account.display_name()]
            .into_iter()
            .filter(|s| !s.trim().is_empty() && !account.anonymized)
            .collect();
        let token = format!("deleted-{:06}", self.allocate());
        self.release_account(id, now);
        self.accounts.remove(&id);
        self.tombstones.insert(id, token.clone());
        self.scrub_text(&needles, &token);
        self.auth.password_hashes.remove(&id);
        self.auth.api_tokens.retain(|_, owner| *owner != id);
        self.external_events.remove(&id);
        self.time_off.retain(|_, t| t.account != id);
        Ok(token)
    }

    fn release_account(&mut self, id: AccountId, now: Timestamp) {
        for shift in self.shifts.values_mut() {
            if shift.interval.start >= now {
                shift.assignments.remove(&id);
            }
            shift.favorites.remove(&id);
        }
        for schedule in self.schedules.values_mut() {
            schedule.members.remove(&id);
            schedule.grants.remove(&id);
        }
        for request in self.requests.values_mut() {
            if request.state.is_live() && (request.initiator == id || request.counterparty == Some(id)) {
                request.state = super::exchange::RequestState::Cancelled;
                request.version += 1;
            }
        }
    }

    fn scrub_text(&mut self, needles: &[String], token: &str) {
        let scrub = |text: &mut String| {
            for needle in needles {
                if text.contains(needle.as_str()) {
                    *text = text.replace(needle.as_str(), token);
                }
            }
        };
        for entry in &mut self.outbox {
            entry.notification.payload.values_mut().for_each(scrub);
        }
        for t in self.time_off.values_mut() {
            scrub(&mut t.reason);
        }
        for a in self.announcements.values_mut() {
            scrub(&mut a.title);
            scrub(&mut a.body);
        }
        for events in self.external_events.values_mut() {
            for e in events {
                scrub(&mut e.summary);
            }
        }
    }

    pub fn add_location(&mut self, name: &str) -> Result<LocationId, DomainError> {
        check_name("location", name, self.locations.values().map(|l| l.name.as_str()))?;
        let id = LocationId(self.allocate());
        self.locations.insert(id, Location { id, name: name.trim().to_string() });
        Ok(id)
    }

    pub fn add_department(&mut self, name: &str) -> Result<DepartmentId, DomainError> {
        check_name("department", name, self.departments.values().map(|l| l.name.as_str()))?;
        let id = DepartmentId(self.allocate());
        self.departments.insert(id, Department { id, name: name.trim().to_string() });
        Ok(id)
    }

    pub fn add_position(&mut self, name: &str, default_color: Option<&str>) -> Result<PositionId, DomainError> {
        check_name("position", name, self.positions.values().map(|l| l.name.as_str()))?;
        let default_color = default_color
            .map(|c| c.parse::<Color>().map_err(|_| DomainError::MalformedColor { value: c.to_string() }))
            .transpose()?;
        let id = PositionId(self.allocate());
        self.positions.insert(id, Position { id, name: name.trim().to_string(), default_color });
        Ok(id)
    }

    pub fn add_schedule(&mut self, name: &str, location: Option<LocationId>) -> Result<ScheduleId, DomainError> {
        check_name("schedule", name, self.schedules.values().map(|s| s.name.as_str()))?;
        if let Some(loc) = location {
            if !self.locations.contains_key(&loc) {
                return Err(DomainError::UnknownLocation { id: loc });
            }
        }
        let id = ScheduleId(self.allocate());
        let mut schedule = Schedule::new(id, name.trim());
        schedule.location = location;
        self.schedules.insert(id, schedule);
        Ok(id)
    }

    pub fn add_member(&mut self, schedule: ScheduleId, account: AccountId) -> Result<(), DomainError> {
        let acc = self.account(account)?;
        if acc.anonymized {
            return Err(DomainError::AlreadyAnonymized { id: account });
        }
        let schedule = self.schedules.get_mut(&schedule).ok_or(DomainError::UnknownSchedule { id: schedule })?;
        schedule.members.insert(account);
        Ok(())
    }

    /// Removes a member. Their grant goes with them.
    pub fn remove_member(&mut self, schedule: ScheduleId, account: AccountId) -> Result<(), DomainError> {
        let sched = self.schedules.get_mut(&schedule).ok_or(DomainError::UnknownSchedule { id: schedule })?;
        if !sched.members.remove(&account) {
            return Err(DomainError::NotMember { account, schedule });
        }
        sched.grants.remove(&account);
        Ok(())
    }

    pub fn grant_rights(
        &mut self,
        schedule: ScheduleId,
        account: AccountId,
        rights: super::org::ElevatedRights,
    ) -> Result<&Schedule, DomainError> {
        rights.check().map_err(|_| DomainError::CascadeViolation)?;
        let sched = self.schedules.get_mut(&schedule).ok_or(DomainError::UnknownSchedule { id: schedule })?;
        if !sched.members.contains(&account) {
            return Err(DomainError::NotMember { account, schedule });
        }
        if rights.is_none() {
            sched.grants.remove(&account);
        } else {
            sched.grants.insert(account, rights);
        }
        Ok(sched)
    }

    pub fn set_settings(&mut self, settings: SystemSettings) -> Result<(), DomainError> {
        if settings.default_dashboard_days < 1 {
            return Err(DomainError::BadDashboardDays);
        }
        self.settings = settings;
        Ok(())
    }

    pub fn set_opening_hours(&mut self, mut calendar: OpeningHoursCalendar) -> Result<(), DomainError> {
        let bad = |detail: String| DomainError::BadOpeningHours { detail };
        calendar.periods.sort_by_key(|p| p.range.start);
        for pair in calendar.periods.windows(2) {
            if pair[0].range.end > pair[1].range.start {
                return Err(bad(format!("periods {:?} and {:?} overlap", pair[0].name, pair[1].name)));
            }
        }
        for period in &mut calendar.periods {
            for day in period.weekly.iter_mut() {
                normalize_ranges(day).map_err(|_| bad(format!("overlapping ranges in period {:?}", period.name)))?;
            }
        }
        for (date, ranges) in calendar.exceptions.iter_mut() {
            normalize_ranges(ranges).map_err(|_| bad(format!("overlapping ranges on {date}")))?;
        }
        self.opening_hours = calendar;
        Ok(())
    }

    /// Lists every violated type invariant in the stored data.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut emails = BTreeSet::new();
        for account in self.accounts.values() {
            if !account.anonymized && !emails.insert(account.email.to_ascii_lowercase()) {
                out.push(format!("account {}: duplicate email", account.id));
            }
            if let Some(c) = &account.color {
                if c.as_str().parse::<Color>().map(|n| n != *c).unwrap_or(true) {
                    out.push(format!("account {}: malformed color", account.id));
                }
            }
            if let (Some(min), Some(max)) = (account.quotas.min_hours_per_week, account.quotas.max_hours_per_week) {
                if min > max {
                    out.push(format!("account {}: quota min > max", account.id));
                }
            }
            if QuotaKind::ALL.iter().any(|k| account.quotas.get(*k) == Some(0)) {
                out.push(format!("account {}: zero quota", account.id));
            }
            if account.anonymized && (account.given_name != account.family_name || account.given_name != account.email) {
                out.push(format!("account {}: anonymized fields differ", account.id));
            }
            if let Some(days) = &account.availability.weekly {
                for day in days {
                    if day.windows(2).any(|w| w[0].end > w[1].start || w[0] > w[1]) {
                        out.push(format!("account {}: availability unsorted/overlapping", account.id));
                    }
                }
            }
        }
        for schedule in self.schedules.values() {
            for (account, rights) in &schedule.grants {
                if !schedule.members.contains(account) {
                    out.push(format!("schedule {}: grant to non-member {}", schedule.id, account));
                }
                if rights.check().is_err() {
                    out.push(format!("schedule {}: grant cascade violated for {}", schedule.id, account));
                }
            }
        }
        for shift in self.shifts.values() {
            let Some(schedule) = self.schedules.get(&shift.schedule) else {
                out.push(format!("shift {}: unknown schedule", shift.id));
                continue;
            };
            if shift.interval.start >= shift.interval.end {
                out.push(format!("shift {}: empty interval", shift.id));
            }
            if let Some(max) = shift.max_staff {
                if shift.assignments.len() > max as usize {
                    out.push(format!("shift {}: over max_staff", shift.id));
                }
                if max < shift.min_staff {
                    out.push(format!("shift {}: max_staff below min_staff", shift.id));
                }
            }
            for a in &shift.assignments {
                let retained = self.tombstones.contains_key(a) || self.accounts.get(a).is_some_and(|acc| acc.anonymized);
                if retained {
                    continue;
                }
                if !schedule.members.contains(a) {
                    out.push(format!("shift {}: assignee {} is not a member", shift.id, a));
                }
                if !shift.required_positions.is_empty() {
                    let holds = self.accounts.get(a).is_some_and(|acc| !acc.positions.is_disjoint(&shift.required_positions));
                    if !holds {
                        out.push(format!("shift {}: assignee {} lacks a required position", shift.id, a));
                    }
                }
            }
        }
        for t in self.time_off.values() {
            if t.interval.start >= t.interval.end {
                out.push(format!("time_off {}: empty interval", t.id));
            }
        }
        let mut live = BTreeSet::new();
        for r in self.requests.values() {
            if matches!(r.state, super::exchange::RequestState::Open | super::exchange::RequestState::Accepted)
                && !live.insert((r.shift, r.kind, r.initiator))
            {
                out.push(format!("request {}: duplicate live request", r.id));
            }
        }
        if self.settings.default_dashboard_days < 1 {
            out.push("settings: default_dashboard_days < 1".into());
        }
        out
    }
}

fn check_name<'a>(kind: &str, name: &str, mut existing: impl Iterator<Item = &'a str>) -> Result<(), DomainError> {
    let name = name.trim();
    if name.is_empty() {
        return Err(DomainError::EmptyField { field: format!("{kind} name") });
    }
    if existing.any(|n| n.eq_ignore_ascii_case(name)) {
        return Err(DomainError::DuplicateName { kind: kind.to_string(), name: name.to_string() });
    }
    Ok(())
}
