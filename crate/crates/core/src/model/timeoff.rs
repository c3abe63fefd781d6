use serde::{Deserialize, Serialize};

use super::ids::{AccountId, TimeOffId};
use crate::time::Interval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOffState {
    Pending,
    Approved,
    Denied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Deny,
}

impl TimeOffState {
    /// Only `Pending` can be resolved.
    pub fn resolve(self, decision: Decision) -> Option<TimeOffState> {
        match (self, decision) {
            (TimeOffState::Pending, Decision::Approve) => Some(TimeOffState::Approved),
            (TimeOffState::Pending, Decision::Deny) => Some(TimeOffState::Denied),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeOff {
    pub id: TimeOffId,
    pub account: AccountId,
    pub interval: Interval,
    #[serde(default)]
    pub reason: String,
    pub state: TimeOffState,
    /// Source event identity for calendar imports, used to dedupe re-imports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_uid: Option<String>,
}
