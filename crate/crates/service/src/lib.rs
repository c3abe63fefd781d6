//! HTTP+JSON facade over the roster: authentication, rights enforcement,
//! publication, dashboards and the optimistic-concurrency contract.

pub mod auth;
pub mod error;
mod handlers;
pub mod i18n;
pub mod openapi;
pub mod routes;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::ops::Deref;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::Router;
use ipnet::IpNet;
use rosterd_core::model::{Locale, Roster, ScheduleId};
use rosterd_core::time::Timestamp;
use rosterd_store::{Committed, Snapshot, Store};

use crate::auth::Session;
use crate::error::{ApiError, ApiResult};

#[derive(Clone, Debug)]
pub struct Config {
    /// Base URL used in published links and embed snippets.
    pub public_base_url: String,
    /// Overrides the stored allowlist when set.
    pub allowlist: Option<Vec<IpNet>>,
    /// Overrides the stored default locale when set.
    pub locale_default: Option<Locale>,
    /// Where delivered notifications are appended, one JSON line each.
    pub outbox_file: Option<PathBuf>,
    pub session_minutes: i64,
}

impl Default for Config {
    fn default() -> Self {
        Config { public_base_url: "http://127.0.0.1:8080".into(), allowlist: None, locale_default: None, outbox_file: None, session_minutes: 12 * 60 }
    }
}

type Clock = Box<dyn Fn() -> Timestamp + Send + Sync>;

pub struct Inner {
    pub store: Store,
    pub config: Config,
    pub(crate) sessions: Mutex<HashMap<String, Session>>,
    clock: Clock,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl Deref for AppState {
    type Target = Inner;
    fn deref(&self) -> &Inner {
        &self.0
    }
}

impl AppState {
    pub fn new(store: Store, config: Config) -> Self {
        Self::with_clock(store, config, || Timestamp::truncate(chrono::Utc::now()))
    }

    /// Same as [`AppState::new`] with a fixed notion of "now", for tests.
    pub fn with_clock(store: Store, config: Config, clock: impl Fn() -> Timestamp + Send + Sync + 'static) -> Self {
        AppState(Arc::new(Inner { store, config, sessions: Mutex::new(HashMap::new()), clock: Box::new(clock) }))
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    pub fn default_locale(&self) -> Locale {
        self.config
            .locale_default
            .or_else(|| self.store.snapshot().ok().map(|s| s.roster.settings.locale_default))
            .unwrap_or_default()
    }

    pub async fn read(&self) -> ApiResult<Snapshot> {
        let app = self.clone();
        tokio::task::spawn_blocking(move || app.store.snapshot().map_err(ApiError::from))
            .await
            .map_err(|e| ApiError::new("internal").with("detail", e.to_string()))?
    }

    pub async fn write<T: Send + 'static>(
        &self,
        expect: Vec<(ScheduleId, u64)>,
        f: impl FnOnce(&mut Roster) -> ApiResult<T> + Send + 'static,
    ) -> ApiResult<Committed<T>> {
        let app = self.clone();
        tokio::task::spawn_blocking(move || app.store.transact(&expect, f).map_err(ApiError::from))
            .await
            .map_err(|e| ApiError::new("internal").with("detail", e.to_string()))?
    }
}

/// The full application router.
pub fn app(state: AppState) -> Router {
    routes::router(state)
}

/// Router with a fixed client address, for in-process tests.
pub fn app_with_peer(state: AppState, peer: SocketAddr) -> Router {
    app(state).layer(axum::extract::connect_info::MockConnectInfo(peer))
}
