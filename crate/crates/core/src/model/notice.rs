use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ids::{AccountId, AnnouncementId, ScheduleId};
use super::settings::Locale;
use crate::time::{Interval, Timestamp};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    #[default]
    Email,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub recipient: AccountId,
    pub template: String,
    pub locale: Locale,
    #[serde(default)]
    pub payload: BTreeMap<String, String>,
    #[serde(default)]
    pub channel: Channel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxEntry {
    pub seq: u64,
    pub notification: Notification,
    #[serde(default)]
    pub delivered: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "schedules")]
pub enum Audience {
    All,
    Schedules(BTreeSet<ScheduleId>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub id: AnnouncementId,
    pub author: AccountId,
    pub title: String,
    pub body: String,
    pub published_at: Timestamp,
    pub audience: Audience,
}

/// A busy block taken from an account's external calendar feed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEvent {
    pub uid: String,
    #[serde(default)]
    pub summary: String,
    pub interval: Interval,
}
