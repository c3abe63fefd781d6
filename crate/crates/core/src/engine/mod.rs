//! Assignment legality: eligibility, conflicts, quotas, understaffing, the
//! auto-scheduler and shift editing.
//!
//! Read-only functions take `&Roster`; mutating ones take `&mut Roster` and
//! either fully apply or leave the roster untouched.

mod assign;
mod autoschedule;
mod conflicts;
mod quotas;
mod shifts;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assign::{assign, check_assignment, eligible_accounts, unassign, understaffed, Candidate};
pub use autoschedule::{auto_schedule, plan_auto_schedule, AutoScheduleOutcome, AutoScheduleParams, PlannedAssignment, UnfilledShift};
pub use conflicts::{assignment_overlaps, conflicts_for, external_overlaps, outside_opening_hours, ConflictKind, ConflictReport};
pub use quotas::{check_quotas, QuotaViolation};
pub use shifts::{
    copy_week, create_shift, delete_shift, split_shift, update_shift, CopyMode, CopyOutcome, RefusedAssignment, ShiftCreation, ShiftDraft,
    ShiftPatch, SkippedAssignment,
};

use crate::model::{AccountId, PositionId, ScheduleId, ShiftId};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum EngineError {
    #[error("unknown shift {id}")]
    UnknownShift { id: ShiftId },
    #[error("unknown account {id}")]
    UnknownAccount { id: AccountId },
    #[error("unknown schedule {id}")]
    UnknownSchedule { id: ScheduleId },
    #[error("unknown position {id}")]
    UnknownPosition { id: PositionId },
    #[error("account {id} is anonymized")]
    AccountAnonymized { id: AccountId },
    #[error("account {account} is already assigned to shift {shift}")]
    AlreadyAssigned { shift: ShiftId, account: AccountId },
    #[error("account {account} is not a member of schedule {schedule}")]
    NotMember { account: AccountId, schedule: ScheduleId },
    #[error("account {account} holds none of the positions required by shift {shift}")]
    NotEligiblePosition { shift: ShiftId, account: AccountId },
    #[error("assignment refused: {} conflict(s)", reports.len())]
    ConflictRefused { reports: Vec<ConflictReport> },
    #[error("assignment refused: {} quota violation(s)", violations.len())]
    QuotaRefused { violations: Vec<QuotaViolation> },
    #[error("shift {shift} already has its maximum staff")]
    MaxStaffReached { shift: ShiftId },
    #[error("only a schedule manager may force an assignment")]
    ForbiddenForce,
    #[error("forbidden")]
    Forbidden,
    #[error("account {account} is not assigned to shift {shift}")]
    NotAssigned { shift: ShiftId, account: AccountId },
    #[error("split point must fall strictly inside the shift")]
    SplitOutOfRange,
    #[error("date range is empty")]
    EmptyRange,
    #[error("source week has no shifts")]
    SourceWeekEmpty,
    #[error("invalid parameters: {detail}")]
    InvalidParams { detail: String },
}
