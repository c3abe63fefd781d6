use serde::{Deserialize, Serialize};

use super::ids::{AccountId, RequestId, ShiftId};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    Claim,
    GiveUp,
    Drop,
    Swap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Open,
    Accepted,
    ApprovedPending,
    Completed,
    Cancelled,
    Rejected,
}

impl RequestState {
    pub const ALL: [RequestState; 6] = [
        RequestState::Open,
        RequestState::Accepted,
        RequestState::ApprovedPending,
        RequestState::Completed,
        RequestState::Cancelled,
        RequestState::Rejected,
    ];

    pub fn is_live(&self) -> bool {
        matches!(self, RequestState::Open | RequestState::Accepted | RequestState::ApprovedPending)
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, RequestState::Completed | RequestState::Cancelled | RequestState::Rejected)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRequest {
    pub id: RequestId,
    pub kind: ExchangeKind,
    pub shift: ShiftId,
    pub initiator: AccountId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterparty: Option<AccountId>,
    /// The counterparty's shift handed to the initiator in a two-sided swap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter_shift: Option<ShiftId>,
    pub state: RequestState,
    pub created_at: Timestamp,
    /// Bumped on every transition; callers may compare-and-set on it.
    #[serde(default)]
    pub version: u64,
}
