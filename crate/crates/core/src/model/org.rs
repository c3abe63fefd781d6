use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::account::Color;
use super::ids::{AccountId, DepartmentId, LocationId, PositionId, ScheduleId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub id: LocationId,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Department {
    pub id: DepartmentId,
    pub name: String,
}

/// A role label that gates which accounts may fill a shift. An external
/// company is also modeled as a position carrying the company name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub id: PositionId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_color: Option<Color>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleSettings {
    #[serde(default)]
    pub swap_requires_approval: bool,
    #[serde(default = "yes")]
    pub swap_enabled: bool,
    #[serde(default = "yes")]
    pub claiming_enabled: bool,
    #[serde(default = "yes")]
    pub give_up_enabled: bool,
    #[serde(default = "yes")]
    pub drop_enabled: bool,
}

fn yes() -> bool {
    true
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        Self { swap_requires_approval: false, swap_enabled: true, claiming_enabled: true, give_up_enabled: true, drop_enabled: true }
    }
}

/// Per-schedule manager grant. Viewing statistics and approving time-off
/// both require the right to manage shifts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElevatedRights {
    pub manage_shifts: bool,
    pub view_stats: bool,
    pub approve_time_off: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("view_stats and approve_time_off require manage_shifts")]
pub struct CascadeViolation;

impl ElevatedRights {
    pub const NONE: ElevatedRights = ElevatedRights { manage_shifts: false, view_stats: false, approve_time_off: false };
    pub const FULL: ElevatedRights = ElevatedRights { manage_shifts: true, view_stats: true, approve_time_off: true };

    pub fn new(manage_shifts: bool, view_stats: bool, approve_time_off: bool) -> Result<Self, CascadeViolation> {
        let rights = Self { manage_shifts, view_stats, approve_time_off };
        rights.check()?;
        Ok(rights)
    }

    pub fn check(&self) -> Result<(), CascadeViolation> {
        if (self.view_stats || self.approve_time_off) && !self.manage_shifts {
            return Err(CascadeViolation);
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub id: ScheduleId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationId>,
    #[serde(default)]
    pub members: BTreeSet<AccountId>,
    #[serde(default)]
    pub is_public: bool,
    #[serde(default)]
    pub settings: ScheduleSettings,
    #[serde(default)]
    pub grants: BTreeMap<AccountId, ElevatedRights>,
}

impl Schedule {
    pub fn new(id: ScheduleId, name: &str) -> Self {
        Self {
            id,
            name: name.to_string(),
            location: None,
            members: BTreeSet::new(),
            is_public: false,
            settings: ScheduleSettings::default(),
            grants: BTreeMap::new(),
        }
    }

    pub fn rights_of(&self, account: AccountId) -> ElevatedRights {
        self.grants.get(&account).copied().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_holds_for_every_combination() {
        for bits in 0..8u8 {
            let (m, v, a) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let ok = ElevatedRights::new(m, v, a).is_ok();
            assert_eq!(ok, m || (!v && !a), "{m} {v} {a}");
        }
    }
}
