//! Fixture files and the idempotent seeding of a roster from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rosterd_core::model::*;
use rosterd_core::time::{Interval, Timestamp};
use rosterd_service::auth;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    #[serde(default)]
    pub settings: Option<SystemSettings>,
    #[serde(default)]
    pub locations: Vec<String>,
    #[serde(default)]
    pub departments: Vec<String>,
    #[serde(default)]
    pub positions: Vec<PositionSpec>,
    #[serde(default)]
    pub accounts: Vec<AccountSpec>,
    #[serde(default)]
    pub schedules: Vec<ScheduleSpec>,
    #[serde(default)]
    pub shifts: Vec<ShiftSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionSpec {
    pub name: String,
    #[serde(default)]
    pub color: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountSpec {
    pub email: String,
    pub given_name: String,
    #[serde(default)]
    pub family_name: String,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub password: Option<String>,
    #[serde(default)]
    pub positions: Vec<String>,
    #[serde(default)]
    pub departments: Vec<String>,
    #[serde(default)]
    pub locations: Vec<String>,
    #[serde(default)]
    pub color: Option<String>,
    #[serde(default)]
    pub quotas: QuotaSet,
    #[serde(default)]
    pub availability: AvailabilityGrid,
    #[serde(default)]
    pub pay: Option<PayRates>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub name: String,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub members: Vec<String>,
    /// Email to rights. Grantees are added as members.
    #[serde(default)]
    pub grants: BTreeMap<String, ElevatedRights>,
    #[serde(default)]
    pub settings: ScheduleSettings,
    #[serde(default)]
    pub public: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub schedule: String,
    pub title: String,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default = "one")]
    pub min_staff: u32,
    #[serde(default)]
    pub max_staff: Option<u32>,
    #[serde(default)]
    pub positions: Vec<String>,
    #[serde(default)]
    pub favorites: Vec<String>,
    #[serde(default)]
    pub assign: Vec<String>,
    #[serde(default)]
    pub work_from_home: bool,
}

fn one() -> u32 {
    1
}

pub fn parse(text: &str) -> Result<Fixture, CliError> {
    serde_yaml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

/// Entity counts of one fixture.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub schedules: usize,
    pub accounts: usize,
    pub positions: usize,
    pub locations: usize,
    pub departments: usize,
    pub shifts: usize,
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "schedules: {}, accounts: {}, positions: {}, locations: {}, departments: {}, shifts: {}",
            self.schedules, self.accounts, self.positions, self.locations, self.departments, self.shifts
        )
    }
}

fn violation(path: impl Into<String>, detail: impl fmt::Display) -> CliError {
    CliError::InvariantViolation { path: path.into(), detail: detail.to_string() }
}

fn find<'a, K: Copy>(names: impl Iterator<Item = (K, &'a String)>, wanted: &str) -> Option<K> {
    names.into_iter().find(|(_, n)| n.eq_ignore_ascii_case(wanted.trim())).map(|(k, _)| k)
}

struct Lookup<'r>(&'r Roster);

impl Lookup<'_> {
    fn location(&self, path: &str, name: &str) -> Result<LocationId, CliError> {
        find(self.0.locations.values().map(|l| (l.id, &l.name)), name).ok_or_else(|| violation(path, format!("unknown location {name:?}")))
    }

    fn department(&self, path: &str, name: &str) -> Result<DepartmentId, CliError> {
        find(self.0.departments.values().map(|l| (l.id, &l.name)), name).ok_or_else(|| violation(path, format!("unknown department {name:?}")))
    }

    fn position(&self, path: &str, name: &str) -> Result<PositionId, CliError> {
        find(self.0.positions.values().map(|l| (l.id, &l.name)), name).ok_or_else(|| violation(path, format!("unknown position {name:?}")))
    }

    fn account(&self, path: &str, email: &str) -> Result<AccountId, CliError> {
        self.0.account_by_email(email.trim()).map(|a| a.id).ok_or_else(|| violation(path, format!("unknown account {email:?}")))
    }

    fn schedule(&self, path: &str, name: &str) -> Result<ScheduleId, CliError> {
        find(self.0.schedules.values().map(|s| (s.id, &s.name)), name).ok_or_else(|| violation(path, format!("unknown schedule {name:?}")))
    }
}

/// Upserts every fixture entity by its natural key: names for locations,
/// departments, positions and schedules, email for accounts, and
/// (schedule, title, start) for shifts.
pub fn seed(r: &mut Roster, fx: &Fixture) -> Result<Counts, CliError> {
    if let Some(settings) = &fx.settings {
        r.set_settings(settings.clone()).map_err(|e| violation("settings", e))?;
    }
    for (i, name) in fx.locations.iter().enumerate() {
        if find(r.locations.values().map(|l| (l.id, &l.name)), name).is_none() {
            r.add_location(name).map_err(|e| violation(format!("locations[{i}]"), e))?;
        }
    }
    for (i, name) in fx.departments.iter().enumerate() {
        if find(r.departments.values().map(|l| (l.id, &l.name)), name).is_none() {
            r.add_department(name).map_err(|e| violation(format!("departments[{i}]"), e))?;
        }
    }
    for (i, p) in fx.positions.iter().enumerate() {
        let path = format!("positions[{i}] ({})", p.name);
        match find(r.positions.values().map(|l| (l.id, &l.name)), &p.name) {
            None => {
                r.add_position(&p.name, p.color.as_deref()).map_err(|e| violation(&path, e))?;
            }
            Some(id) => {
                let color = p.color.as_deref().map(|c| c.parse::<Color>().map_err(|e| violation(&path, e))).transpose()?;
                r.positions.get_mut(&id).expect("found").default_color = color;
            }
        }
    }

    for (i, spec) in fx.accounts.iter().enumerate() {
        let path = format!("accounts[{i}] ({})", spec.email);
        seed_account(r, spec, &path)?;
    }

    for (i, spec) in fx.schedules.iter().enumerate() {
        let path = format!("schedules[{i}] ({})", spec.name);
        let location = spec.location.as_deref().map(|l| Lookup(r).location(&path, l)).transpose()?;
        let id = match Lookup(r).schedule(&path, &spec.name) {
            Ok(id) => id,
            Err(_) => r.add_schedule(&spec.name, location).map_err(|e| violation(&path, e))?,
        };
        let mut members = BTreeSet::new();
        for email in spec.members.iter().chain(spec.grants.keys()) {
            members.insert(Lookup(r).account(&path, email)?);
        }
        let mut grants = BTreeMap::new();
        for (email, rights) in &spec.grants {
            rights.check().map_err(|_| violation(format!("{path} grant {email}"), DomainError::CascadeViolation))?;
            if !rights.is_none() {
                grants.insert(Lookup(r).account(&path, email)?, *rights);
            }
        }
        let s = r.schedules.get_mut(&id).expect("present");
        s.location = location;
        s.members = members;
        s.grants = grants;
        s.settings = spec.settings;
        s.is_public = spec.public;
    }

    let mut seen = BTreeSet::new();
    for (i, spec) in fx.shifts.iter().enumerate() {
        let path = format!("shifts[{i}] ({} {} {})", spec.schedule, spec.title, spec.start);
        let look = Lookup(r);
        let schedule = look.schedule(&path, &spec.schedule)?;
        if !seen.insert((schedule, spec.title.clone(), spec.start)) {
            return Err(violation(&path, "duplicate shift"));
        }
        let interval = Interval::new(spec.start, spec.end).map_err(|e| violation(&path, e))?;
        if spec.max_staff.is_some_and(|m| m == 0 || m < spec.min_staff) {
            return Err(violation(&path, "max_staff must be at least min_staff and 1"));
        }
        let required_positions = spec.positions.iter().map(|p| look.position(&path, p)).collect::<Result<BTreeSet<_>, _>>()?;
        let favorites = spec.favorites.iter().map(|a| look.account(&path, a)).collect::<Result<BTreeSet<_>, _>>()?;
        let assignments = spec.assign.iter().map(|a| look.account(&path, a)).collect::<Result<BTreeSet<_>, _>>()?;
        let existing = r.shifts.values().find(|s| s.schedule == schedule && s.title == spec.title && s.interval.start == spec.start).map(|s| s.id);
        let id = existing.unwrap_or_else(|| ShiftId(r.allocate()));
        let mut shift = r.shifts.remove(&id).unwrap_or_else(|| Shift::new(id, schedule, &spec.title, interval));
        shift.interval = interval;
        shift.min_staff = spec.min_staff;
        shift.max_staff = spec.max_staff;
        shift.required_positions = required_positions;
        shift.favorites = favorites;
        shift.assignments = assignments;
        shift.work_from_home = spec.work_from_home;
        r.shifts.insert(id, shift);
    }

    if let Some(problem) = r.check_invariants().into_iter().next() {
        return Err(violation("roster", problem));
    }
    Ok(Counts {
        schedules: fx.schedules.len(),
        accounts: fx.accounts.len(),
        positions: fx.positions.len(),
        locations: fx.locations.len(),
        departments: fx.departments.len(),
        shifts: fx.shifts.len(),
    })
}

fn seed_account(r: &mut Roster, spec: &AccountSpec, path: &str) -> Result<(), CliError> {
    let look = Lookup(r);
    let positions = spec.positions.iter().map(|p| look.position(path, p)).collect::<Result<_, _>>()?;
    let departments = spec.departments.iter().map(|p| look.department(path, p)).collect::<Result<_, _>>()?;
    let locations = spec.locations.iter().map(|p| look.location(path, p)).collect::<Result<_, _>>()?;
    let id = r.account_by_email(&spec.email).map(|a| a.id).unwrap_or_else(|| AccountId(r.allocate()));
    let color = spec.color.as_deref().map(|c| c.parse::<Color>().map_err(|e| violation(path, e))).transpose()?;
    let mut account = Account::new(id, &spec.given_name, &spec.family_name, &spec.email);
    account.role = spec.role;
    account.positions = positions;
    account.departments = departments;
    account.locations = locations;
    account.color = color;
    account.quotas = spec.quotas;
    account.availability = spec.availability.clone();
    account.pay = spec.pay;
    r.upsert_account(account).map_err(|errors| {
        let detail: Vec<String> = errors.iter().map(ToString::to_string).collect();
        violation(path, detail.join("; "))
    })?;
    if let Some(password) = &spec.password {
        let current = r.auth.password_hashes.get(&id).is_some_and(|h| auth::verify_password(h, password));
        if !current {
            let hash = auth::hash_password(password).map_err(|e| violation(path, e.code))?;
            r.auth.password_hashes.insert(id, hash);
        }
    }
    Ok(())
}
