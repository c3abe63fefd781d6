//! Domain model, scheduling engine, workflows, calendar interop and
//! reporting for the rosterd staff-rostering platform.

pub mod calendar;
pub mod engine;
pub mod ical;
pub mod model;
pub mod notify;
pub mod report;
pub mod rights;
pub mod time;
pub mod workflow;

#[cfg(feature = "testkit")]
pub mod testkit;
