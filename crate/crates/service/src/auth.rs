//! Local authentication provider, sessions, API tokens and rights checks.

use std::net::{IpAddr, SocketAddr};

use argon2::password_hash::phc::PasswordHash;
use argon2::password_hash::{PasswordHasher, PasswordVerifier};
use argon2::Argon2;
use axum::extract::{ConnectInfo, FromRequestParts, MatchedPath, Request, State};
use axum::http::header::{AUTHORIZATION, IF_MATCH};
use axum::http::request::Parts;
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use rosterd_core::model::{AccountId, RequestId, Role, Roster, ScheduleId, ShiftId, TimeOffId};
use rosterd_core::rights;
use rosterd_core::time::Timestamp;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{ApiError, ApiResult};
use crate::routes::{self, Rule};
use crate::AppState;

#[derive(Clone, Debug, Serialize)]
pub struct Session {
    pub account: AccountId,
    pub role: Role,
    pub issued_at: Timestamp,
    pub expires_at: Timestamp,
    pub client_ip: Option<IpAddr>,
}

pub fn hash_password(password: &str) -> ApiResult<String> {
    Argon2::default()
        .hash_password(password.as_bytes())
        .map(|h| h.to_string())
        .map_err(|e| ApiError::new("internal").with("detail", e.to_string()))
}

pub fn verify_password(phc: &str, password: &str) -> bool {
    PasswordHash::new(phc).is_ok_and(|h| Argon2::default().verify_password(password.as_bytes(), &h).is_ok())
}

pub fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

pub fn fresh_token() -> String {
    hex::encode(rand::random::<[u8; 32]>())
}

/// Creates a long-lived API token for `account`; only its digest is stored.
pub fn issue_api_token(roster: &mut Roster, account: AccountId) -> ApiResult<String> {
    let a = roster.account(account)?;
    if a.anonymized {
        return Err(ApiError::tagged(&rosterd_core::engine::EngineError::AccountAnonymized { id: account }));
    }
    let token = fresh_token();
    roster.auth.api_tokens.insert(token_digest(&token), account);
    Ok(token)
}

/// The authenticated principal of a request.
#[derive(Clone, Debug)]
pub struct Caller {
    pub account: AccountId,
    pub token: String,
}

pub fn bearer(parts: &axum::http::HeaderMap) -> Option<&str> {
    parts.get(AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

/// Allowlist and authentication gate, run after routing so the route's
/// rule is known. Public pages skip the allowlist.
pub async fn gate(
    State(app): State<AppState>,
    peer: Result<ConnectInfo<SocketAddr>, axum::extract::rejection::ExtensionRejection>,
    matched: Option<MatchedPath>,
    mut req: Request,
    next: Next,
) -> Response {
    let Some(spec) = matched.and_then(|m| routes::lookup(req.method(), m.as_str())) else {
        return next.run(req).await;
    };
    let ip = peer.ok().map(|ConnectInfo(addr)| addr.ip());
    let snapshot = match app.read().await {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    if !spec.path.starts_with("/public/") && spec.path != "/api/health" {
        let list = app.config.allowlist.as_ref().unwrap_or(&snapshot.roster.settings.ip_allowlist);
        let allowed = list.is_empty() || ip.is_some_and(|ip| list.iter().any(|net| net.contains(&ip)));
        if !allowed {
            return ApiError::new("ip_not_allowed").with("ip", ip.map(|i| i.to_string()).unwrap_or_else(|| "unknown".into())).into_response();
        }
    }
    if spec.rule == Rule::Public {
        return next.run(req).await;
    }
    let Some(token) = bearer(req.headers()).map(String::from) else {
        return ApiError::new("unauthenticated").into_response();
    };
    let account = {
        let mut sessions = app.sessions.lock().unwrap_or_else(|p| p.into_inner());
        match sessions.get(&token) {
            Some(s) if s.expires_at > app.now() => Some(s.account),
            Some(_) => {
                sessions.remove(&token);
                None
            }
            None => None,
        }
    }
    .or_else(|| snapshot.roster.auth.api_tokens.get(&token_digest(&token)).copied());
    let live = account.filter(|a| snapshot.roster.accounts.get(a).is_some_and(|acc| !acc.anonymized));
    let Some(account) = live else {
        return ApiError::new("unauthenticated").into_response();
    };
    req.extensions_mut().insert(Caller { account, token });
    req.extensions_mut().insert(spec);
    next.run(req).await
}

/// Caller, the route's rule and the optional `If-Match` schedule version.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub caller: AccountId,
    pub token: String,
    pub rule: Rule,
    pub if_match: Option<u64>,
}

impl Ctx {
    pub fn allow(&self, r: &Roster, target: &Target) -> ApiResult<()> {
        authorize(r, self.caller, self.rule, target)
    }

    /// Version expectations for a mutation on `schedule`.
    pub fn expect(&self, schedule: ScheduleId) -> Vec<(ScheduleId, u64)> {
        self.if_match.map(|v| vec![(schedule, v)]).unwrap_or_default()
    }
}

impl<S: Send + Sync> FromRequestParts<S> for Ctx {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        let caller = parts.extensions.get::<Caller>().cloned().ok_or_else(|| ApiError::new("unauthenticated"))?;
        let rule = parts.extensions.get::<&'static routes::RouteSpec>().map(|s| s.rule).ok_or_else(|| ApiError::new("internal"))?;
        let if_match = match parts.headers.get(IF_MATCH) {
            None => None,
            Some(v) => {
                let raw = v.to_str().map_err(|_| ApiError::bad_request("If-Match is not ASCII"))?.trim();
                let raw = raw.strip_prefix("W/").unwrap_or(raw).trim_matches('"');
                if raw == "*" {
                    None
                } else {
                    Some(raw.parse::<u64>().map_err(|_| ApiError::bad_request("If-Match must be a schedule version"))?)
                }
            }
        };
        Ok(Ctx { caller: caller.account, token: caller.token, rule, if_match })
    }
}

/// What a rule is evaluated against.
#[derive(Clone, Debug)]
pub enum Target {
    None,
    Account(AccountId),
    Schedule(ScheduleId),
    Schedules(Vec<ScheduleId>),
    Shift(ShiftId),
    Request(RequestId),
    TimeOff(TimeOffId),
}

impl Target {
    /// Schedules this target belongs to, resolving shifts and requests.
    pub fn schedules(&self, r: &Roster) -> ApiResult<Vec<ScheduleId>> {
        Ok(match self {
            Target::Schedule(s) => {
                r.schedule(*s)?;
                vec![*s]
            }
            Target::Schedules(list) => {
                for s in list {
                    r.schedule(*s)?;
                }
                list.clone()
            }
            Target::Shift(id) => vec![shift_schedule(r, *id)?],
            Target::Request(id) => {
                let req = r.requests.get(id).ok_or_else(|| ApiError::new("unknown_request").with("id", id))?;
                vec![shift_schedule(r, req.shift)?]
            }
            _ => Vec::new(),
        })
    }
}

pub fn shift_schedule(r: &Roster, id: ShiftId) -> ApiResult<ScheduleId> {
    r.shifts.get(&id).map(|s| s.schedule).ok_or_else(|| ApiError::new("unknown_shift").with("id", id))
}

/// Enforces one row of the rights table.
pub fn authorize(r: &Roster, caller: AccountId, rule: Rule, target: &Target) -> ApiResult<()> {
    let admin = rights::is_admin(r, caller);
    let ok = match rule {
        Rule::Public | Rule::Authenticated => true,
        Rule::Admin => admin,
        Rule::SelfOrAdmin => match target {
            Target::Account(a) => {
                r.account(*a)?;
                admin || *a == caller
            }
            _ => admin,
        },
        Rule::Member => target.schedules(r)?.iter().all(|s| rights::can_view(r, caller, *s)),
        Rule::Manager => target.schedules(r)?.iter().all(|s| rights::can_manage(r, caller, *s)),
        Rule::Stats => {
            let list = target.schedules(r)?;
            let list = if list.is_empty() { r.schedules.keys().copied().collect() } else { list };
            admin || list.iter().all(|s| rights::can_view_stats(r, caller, *s))
        }
        Rule::AnyManager => admin || r.schedules.keys().any(|s| rights::can_manage(r, caller, *s)),
        Rule::Approver => match target {
            Target::TimeOff(id) => {
                let t = r.time_off.get(id).ok_or_else(|| ApiError::new("unknown_time_off").with("id", id))?;
                rights::can_approve_time_off_for(r, caller, t.account)
            }
            _ => admin,
        },
        Rule::Counterparty => match target {
            Target::Request(id) => r.requests.get(id).ok_or_else(|| ApiError::new("unknown_request").with("id", id))?.counterparty == Some(caller),
            _ => false,
        },
        Rule::InitiatorOrManager => match target {
            Target::Request(id) => {
                let req = r.requests.get(id).ok_or_else(|| ApiError::new("unknown_request").with("id", id))?;
                req.initiator == caller || rights::can_manage(r, caller, shift_schedule(r, req.shift)?)
            }
            _ => admin,
        },
    };
    if ok {
        Ok(())
    } else {
        Err(ApiError::forbidden())
    }
}
