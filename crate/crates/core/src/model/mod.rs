//! Domain records and the organizational hierarchy.

pub mod account;
pub mod exchange;
pub mod ids;
pub mod notice;
pub mod opening;
pub mod org;
pub mod roster;
pub mod settings;
pub mod shift;
pub mod timeoff;

pub use account::{Account, AvailabilityGrid, Color, PayRates, QuotaKind, QuotaSet, Role};
pub use exchange::{ExchangeKind, ExchangeRequest, RequestState};
pub use ids::*;
pub use notice::{Announcement, Audience, Channel, ExternalEvent, Notification, OutboxEntry};
pub use opening::{OpeningHoursCalendar, OpeningPeriod};
pub use org::{Department, ElevatedRights, Location, Position, Schedule, ScheduleSettings};
pub use roster::{AuthTable, DomainError, Roster};
pub use settings::{Locale, SystemSettings};
pub use shift::{Shift, WeekdayName, WeeklyRecurrence};
pub use timeoff::{Decision, TimeOff, TimeOffState};
