//! In-process harness shared by the service test targets.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rosterd_core::model::*;
use rosterd_core::testkit::{iv, ts};
use rosterd_core::time::Timestamp;
use rosterd_core::workflow;
use rosterd_service::{app_with_peer, auth, AppState, Config};
use rosterd_store::{Snapshot, Store};
use serde_json::Value;
use tower::ServiceExt;

pub const PASSWORD: &str = "correct horse battery";

pub fn now() -> Timestamp {
    ts("2021-09-06T08:00:00Z")
}

fn password_hash() -> String {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| auth::hash_password(PASSWORD).unwrap()).clone()
}

/// A small desk: two schedules, one manager with full rights on `s`,
/// three plain members of `s`, one outsider who only belongs to `t`.
#[derive(Clone)]
pub struct Desk {
    pub roster: Roster,
    pub admin: AccountId,
    pub manager: AccountId,
    pub m1: AccountId,
    pub m2: AccountId,
    pub m3: AccountId,
    pub outsider: AccountId,
    pub s: ScheduleId,
    pub t: ScheduleId,
    pub position: PositionId,
    /// Tue 09-12, m1.
    pub sh_m1: ShiftId,
    /// Wed 09-12, m2, offered as a give-up.
    pub sh_m2: ShiftId,
    /// Thu 09-12, unstaffed.
    pub sh_open: ShiftId,
    /// Fri 09-12, m2, offered to m1 as a swap.
    pub sh_swap: ShiftId,
    /// Tue 13-15 on `t`, outsider.
    pub sh_t: ShiftId,
    pub give_up: RequestId,
    pub swap: RequestId,
    pub time_off: TimeOffId,
}

pub fn token_of(id: AccountId) -> String {
    format!("tok-{}", id.0)
}

fn person(r: &mut Roster, given: &str, family: &str, role: Role) -> AccountId {
    let id = AccountId(r.allocate());
    let mut a = Account::new(id, given, family, &format!("{}@example.org", given.to_lowercase()));
    a.role = role;
    r.upsert_account(a).unwrap();
    r.auth.api_tokens.insert(auth::token_digest(&token_of(id)), id);
    id
}

fn shift(r: &mut Roster, s: ScheduleId, a: &str, b: &str, staff: &[AccountId]) -> ShiftId {
    let id = ShiftId(r.allocate());
    let mut sh = Shift::new(id, s, "Desk", iv(a, b));
    sh.assignments.extend(staff.iter().copied());
    r.shifts.insert(id, sh);
    id
}

impl Desk {
    pub fn new() -> Self {
        let mut r = Roster::new();
        let admin = person(&mut r, "Ada", "Admin", Role::Admin);
        let manager = person(&mut r, "Max", "Manager", Role::Regular);
        let m1 = person(&mut r, "Marie", "Dubois", Role::Regular);
        let m2 = person(&mut r, "Jean", "Martin", Role::Regular);
        let m3 = person(&mut r, "Zoé", "Petit", Role::Regular);
        let outsider = person(&mut r, "Olga", "Other", Role::Regular);
        for id in [admin, m1] {
            r.auth.password_hashes.insert(id, password_hash());
        }
        let position = r.add_position("Desk", Some("#336699")).unwrap();
        let s = r.add_schedule("Circulation", None).unwrap();
        let t = r.add_schedule("Stacks", None).unwrap();
        for a in [manager, m1, m2, m3] {
            r.add_member(s, a).unwrap();
        }
        r.grant_rights(s, manager, ElevatedRights::FULL).unwrap();
        r.add_member(t, outsider).unwrap();
        let sh_m1 = shift(&mut r, s, "2021-09-07T09:00:00Z", "2021-09-07T12:00:00Z", &[m1]);
        let sh_m2 = shift(&mut r, s, "2021-09-08T09:00:00Z", "2021-09-08T12:00:00Z", &[m2]);
        let sh_open = shift(&mut r, s, "2021-09-09T09:00:00Z", "2021-09-09T12:00:00Z", &[]);
        let sh_swap = shift(&mut r, s, "2021-09-10T09:00:00Z", "2021-09-10T12:00:00Z", &[m2]);
        let sh_t = shift(&mut r, t, "2021-09-07T13:00:00Z", "2021-09-07T15:00:00Z", &[outsider]);
        let give_up = workflow::give_up_shift(&mut r, m2, sh_m2, now()).unwrap().id;
        let swap = workflow::request_swap(&mut r, m2, sh_swap, m1, None, now()).unwrap().id;
        let time_off = workflow::request_time_off(&mut r, m1, m1, ts("2021-09-20T00:00:00Z"), ts("2021-09-21T00:00:00Z"), "dentist").unwrap().id;
        r.outbox.clear();
        assert!(r.check_invariants().is_empty(), "{:?}", r.check_invariants());
        Desk { roster: r, admin, manager, m1, m2, m3, outsider, s, t, position, sh_m1, sh_m2, sh_open, sh_swap, sh_t, give_up, swap, time_off }
    }

    pub fn api(&self) -> Api {
        Api::new(self.roster.clone(), Config::default())
    }
}

impl Default for Desk {
    fn default() -> Self {
        Self::new()
    }
}

/// A router over a fresh in-memory store with a controllable clock.
pub struct Api {
    pub state: AppState,
    pub router: Router,
    clock: Arc<AtomicI64>,
}

impl Api {
    pub fn new(roster: Roster, config: Config) -> Self {
        Self::with_peer(roster, config, "127.0.0.1:40000".parse().unwrap())
    }

    pub fn with_peer(roster: Roster, config: Config, peer: SocketAddr) -> Self {
        let store = Store::memory().unwrap();
        store
            .transact(&[], move |r| {
                *r = roster;
                Ok::<_, ()>(())
            })
            .unwrap();
        let clock = Arc::new(AtomicI64::new(now().minutes_since_epoch()));
        let c = clock.clone();
        let state = AppState::with_clock(store, config, move || Timestamp::from_minutes(c.load(Ordering::SeqCst)));
        let router = app_with_peer(state.clone(), peer);
        Api { state, router, clock }
    }

    pub fn advance(&self, minutes: i64) {
        self.clock.fetch_add(minutes, Ordering::SeqCst);
    }

    pub fn snapshot(&self) -> Snapshot {
        self.state.store.snapshot().unwrap()
    }

    pub fn roster(&self) -> Roster {
        (*self.snapshot().roster).clone()
    }

    pub fn req(&self, method: Method, path: &str) -> Call {
        Call { router: self.router.clone(), method, path: path.to_string(), headers: Vec::new(), body: None }
    }

    pub fn get(&self, path: &str) -> Call {
        self.req(Method::GET, path)
    }

    pub fn post(&self, path: &str) -> Call {
        self.req(Method::POST, path)
    }

    pub fn put(&self, path: &str) -> Call {
        self.req(Method::PUT, path)
    }
}

pub struct Call {
    router: Router,
    method: Method,
    path: String,
    headers: Vec<(String, String)>,
    body: Option<(String, Vec<u8>)>,
}

impl Call {
    pub fn token(self, token: &str) -> Self {
        self.header("authorization", &format!("Bearer {token}"))
    }

    pub fn as_(self, id: AccountId) -> Self {
        self.token(&token_of(id))
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn json(mut self, v: Value) -> Self {
        self.body = Some(("application/json".into(), serde_json::to_vec(&v).unwrap()));
        self
    }

    pub fn text(mut self, content_type: &str, s: &str) -> Self {
        self.body = Some((content_type.into(), s.as_bytes().to_vec()));
        self
    }

    pub async fn send(self) -> Reply {
        let mut b = Request::builder().method(self.method).uri(&self.path);
        for (k, v) in &self.headers {
            b = b.header(k.as_str(), v.as_str());
        }
        let req = match self.body {
            Some((ct, bytes)) => b.header(header::CONTENT_TYPE, ct).body(Body::from(bytes)).unwrap(),
            None => b.body(Body::empty()).unwrap(),
        };
        let res = self.router.oneshot(req).await.unwrap();
        let status = res.status();
        let headers = res.headers().clone();
        let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, bytes }
    }
}

#[derive(Debug)]
pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", self.text()))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }

    pub fn code(&self) -> Option<String> {
        serde_json::from_slice::<Value>(&self.bytes).ok()?.get("code")?.as_str().map(String::from)
    }

    pub fn etag(&self) -> Option<u64> {
        self.headers.get(header::ETAG)?.to_str().ok()?.trim_matches('"').parse().ok()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name)?.to_str().ok()
    }

    pub fn is_denied(&self) -> bool {
        matches!(self.status, StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN)
    }
}
