use std::net::SocketAddr;

use axum::extract::rejection::ExtensionRejection;
use axum::extract::{ConnectInfo, State};
use axum::response::Response;
use axum::Json;
use rosterd_core::model::{AccountId, ElevatedRights, Role};
use rosterd_core::rights;
use rosterd_core::time::Timestamp;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{no_content, Body, P};
use crate::auth::{self, Ctx, Session, Target};
use crate::error::{ApiError, ApiResult};
use crate::AppState;

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
pub struct Credentials {
    pub email: String,
    pub password: String,
}

#[derive(Serialize)]
pub struct LoginAnswer {
    pub token: String,
    pub account: AccountId,
    pub role: Role,
    pub expires_at: Timestamp,
}

pub async fn login(
    State(app): State<AppState>,
    peer: Result<ConnectInfo<SocketAddr>, ExtensionRejection>,
    Body(creds): Body<Credentials>,
) -> ApiResult<Json<LoginAnswer>> {
    let snap = app.read().await?;
    let account = snap.roster.account_by_email(creds.email.trim()).cloned();
    let hash = account.as_ref().and_then(|a| snap.roster.auth.password_hashes.get(&a.id).cloned());
    let password = creds.password;
    let ok = match hash {
        Some(h) => tokio::task::spawn_blocking(move || auth::verify_password(&h, &password)).await.unwrap_or(false),
        None => false,
    };
    let Some(account) = account.filter(|_| ok) else {
        return Err(ApiError::new("bad_credentials"));
    };
    let now = app.now();
    let token = auth::fresh_token();
    let session = Session {
        account: account.id,
        role: account.role,
        issued_at: now,
        expires_at: now.plus_minutes(app.config.session_minutes),
        client_ip: peer.ok().map(|ConnectInfo(a)| a.ip()),
    };
    let answer = LoginAnswer { token: token.clone(), account: account.id, role: account.role, expires_at: session.expires_at };
    app.sessions.lock().unwrap_or_else(|p| p.into_inner()).insert(token, session);
    Ok(Json(answer))
}

pub async fn logout(State(app): State<AppState>, ctx: Ctx) -> Response {
    app.sessions.lock().unwrap_or_else(|p| p.into_inner()).remove(&ctx.token);
    no_content()
}

#[derive(Serialize)]
struct Membership {
    schedule: rosterd_core::model::ScheduleId,
    name: String,
    member: bool,
    rights: ElevatedRights,
}

pub async fn me(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Value>> {
    let snap = app.read().await?;
    let r = &snap.roster;
    let account = r.account(ctx.caller)?;
    let schedules: Vec<Membership> = r
        .schedules
        .values()
        .filter(|s| rights::can_view(r, ctx.caller, s.id))
        .map(|s| Membership {
            schedule: s.id,
            name: s.name.clone(),
            member: s.members.contains(&ctx.caller),
            rights: rights::rights_on(r, ctx.caller, s.id),
        })
        .collect();
    Ok(Json(json!({ "account": account, "schedules": schedules })))
}

#[derive(Deserialize)]
pub struct TokenRequest {
    pub account: AccountId,
}

pub async fn issue_token(State(app): State<AppState>, ctx: Ctx, Body(req): Body<TokenRequest>) -> ApiResult<Json<Value>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            auth::issue_api_token(r, req.account)
        })
        .await?;
    Ok(Json(json!({ "token": done.value, "account": req.account })))
}

#[derive(Deserialize)]
pub struct NewPassword {
    pub password: String,
}

pub async fn set_password(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>, Body(req): Body<NewPassword>) -> ApiResult<Response> {
    ctx.allow(&app.read().await?.roster, &Target::Account(id))?;
    if req.password.chars().count() < 8 {
        return Err(ApiError::bad_request("password must have at least 8 characters"));
    }
    let hash = tokio::task::spawn_blocking(move || auth::hash_password(&req.password))
        .await
        .map_err(|e| ApiError::new("internal").with("detail", e.to_string()))??;
    app.write(vec![], move |r| {
        ctx.allow(r, &Target::Account(id))?;
        if r.account(id)?.anonymized {
            return Err(ApiError::new("account_anonymized").with("id", id));
        }
        r.auth.password_hashes.insert(id, hash);
        Ok(())
    })
    .await?;
    Ok(no_content())
}
