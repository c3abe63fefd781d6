use std::fmt;
use std::str::FromStr;

use chrono_tz::Tz;
use ipnet::IpNet;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Locale {
    #[default]
    En,
    Fr,
}

impl Locale {
    pub const ALL: [Locale; 2] = [Locale::En, Locale::Fr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Locale::En => "en",
            Locale::Fr => "fr",
        }
    }
}

impl fmt::Display for Locale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Locale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(Locale::En),
            "fr" => Ok(Locale::Fr),
            other => Err(format!("unsupported locale {other:?}")),
        }
    }
}

fn seven() -> u32 {
    7
}

fn utc() -> Tz {
    Tz::UTC
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSettings {
    #[serde(default = "yes")]
    pub self_time_off_enabled: bool,
    #[serde(default = "yes")]
    pub time_off_requires_approval: bool,
    /// Empty means unrestricted.
    #[serde(default)]
    pub ip_allowlist: Vec<IpNet>,
    #[serde(default = "seven")]
    pub default_dashboard_days: u32,
    #[serde(default)]
    pub locale_default: Locale,
    /// Zone used to decide which calendar day a shift belongs to.
    #[serde(default = "utc")]
    pub display_zone: Tz,
}

fn yes() -> bool {
    true
}

impl Default for SystemSettings {
    fn default() -> Self {
        Self {
            self_time_off_enabled: true,
            time_off_requires_approval: true,
            ip_allowlist: Vec::new(),
            default_dashboard_days: 7,
            locale_default: Locale::En,
            display_zone: Tz::UTC,
        }
    }
}

impl SystemSettings {
    pub fn ip_allowed(&self, ip: std::net::IpAddr) -> bool {
        self.ip_allowlist.is_empty() || self.ip_allowlist.iter().any(|net| net.contains(&ip))
    }
}
