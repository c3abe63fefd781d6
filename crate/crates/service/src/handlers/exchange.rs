use axum::extract::State;
use axum::Json;
use rosterd_core::model::{AccountId, Decision, ExchangeKind, ExchangeRequest, RequestId, Roster, ScheduleId, Shift, ShiftId, TimeOff, TimeOffId};
use rosterd_core::rights;
use rosterd_core::time::Timestamp;
use rosterd_core::workflow;
use serde::{Deserialize, Serialize};

use super::{tagged, Body, ShiftView, Tagged, P};
use crate::auth::{shift_schedule, Ctx, Target};
use crate::error::ApiResult;
use crate::AppState;

/// A request as seen by one caller.
#[derive(Serialize)]
pub struct RequestView {
    #[serde(flatten)]
    pub request: ExchangeRequest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleId>,
    /// The caller could take over this give-up right now.
    pub can_accept: bool,
    /// The caller is the counterparty of an open swap.
    pub can_respond: bool,
}

pub fn request_view(r: &Roster, caller: AccountId, request: &ExchangeRequest) -> RequestView {
    let can_respond = request.kind == ExchangeKind::Swap && request.state == rosterd_core::model::RequestState::Open && request.counterparty == Some(caller);
    RequestView {
        schedule: r.shifts.get(&request.shift).map(|s| s.schedule),
        can_accept: workflow::can_take_over(r, caller, request),
        can_respond,
        request: request.clone(),
    }
}

/// Requests the caller takes part in, manages, or could accept.
pub fn visible_requests(r: &Roster, caller: AccountId) -> Vec<RequestView> {
    r.requests
        .values()
        .filter(|q| {
            q.initiator == caller
                || q.counterparty == Some(caller)
                || r.shifts.get(&q.shift).is_some_and(|s| rights::can_manage(r, caller, s.schedule))
                || workflow::can_take_over(r, caller, q)
        })
        .map(|q| request_view(r, caller, q))
        .collect()
}

pub async fn list_requests(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Vec<RequestView>>> {
    Ok(Json(visible_requests(&app.read().await?.roster, ctx.caller)))
}

#[derive(Serialize)]
pub struct ShiftAndRequest {
    pub shift: ShiftView,
    pub request: ExchangeRequest,
}

async fn schedule_of_shift(app: &AppState, id: ShiftId) -> ApiResult<ScheduleId> {
    shift_schedule(&app.read().await?.roster, id)
}

async fn schedule_of_request(app: &AppState, id: RequestId) -> ApiResult<ScheduleId> {
    let snap = app.read().await?;
    Target::Request(id).schedules(&snap.roster).map(|v| v[0])
}

pub async fn claim(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>) -> ApiResult<Tagged<ShiftAndRequest>> {
    let schedule = schedule_of_shift(&app, id).await?;
    let now = app.now();
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            let (shift, request) = workflow::claim_shift(r, ctx.caller, id, now)?;
            Ok(ShiftAndRequest { shift: shift.into(), request })
        })
        .await?;
    tagged(&app, done, schedule).await
}

pub async fn give_up(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>) -> ApiResult<Tagged<ExchangeRequest>> {
    let schedule = schedule_of_shift(&app, id).await?;
    let now = app.now();
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            Ok(workflow::give_up_shift(r, ctx.caller, id, now)?)
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Deserialize, Default)]
pub struct DropBody {
    #[serde(default)]
    pub replacement: Option<AccountId>,
}

pub async fn drop(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>, Body(b): Body<DropBody>) -> ApiResult<Tagged<ShiftAndRequest>> {
    let schedule = schedule_of_shift(&app, id).await?;
    let now = app.now();
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            let (shift, request): (Shift, ExchangeRequest) = workflow::drop_shift(r, ctx.caller, id, b.replacement, now)?;
            Ok(ShiftAndRequest { shift: shift.into(), request })
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Deserialize)]
pub struct SwapBody {
    pub counterparty: AccountId,
    #[serde(default)]
    pub counter_shift: Option<ShiftId>,
}

pub async fn swap(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>, Body(b): Body<SwapBody>) -> ApiResult<Tagged<ExchangeRequest>> {
    let schedule = schedule_of_shift(&app, id).await?;
    let now = app.now();
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            Ok(workflow::request_swap(r, ctx.caller, id, b.counterparty, b.counter_shift, now)?)
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Deserialize, Default)]
pub struct AcceptBody {
    /// Request version the caller saw; a stale one is refused.
    #[serde(default)]
    pub version: Option<u64>,
}

pub async fn accept(State(app): State<AppState>, ctx: Ctx, P(id): P<RequestId>, Body(b): Body<AcceptBody>) -> ApiResult<Tagged<ExchangeRequest>> {
    let schedule = schedule_of_request(&app, id).await?;
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Request(id))?;
            Ok(workflow::accept_give_up(r, ctx.caller, id, b.version)?)
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Deserialize)]
pub struct RespondBody {
    pub accept: bool,
}

pub async fn respond(State(app): State<AppState>, ctx: Ctx, P(id): P<RequestId>, Body(b): Body<RespondBody>) -> ApiResult<Tagged<ExchangeRequest>> {
    let schedule = schedule_of_request(&app, id).await?;
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Request(id))?;
            Ok(workflow::respond_swap(r, ctx.caller, id, b.accept)?)
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Deserialize)]
pub struct ResolveBody {
    pub approve: bool,
}

pub async fn resolve(State(app): State<AppState>, ctx: Ctx, P(id): P<RequestId>, Body(b): Body<ResolveBody>) -> ApiResult<Tagged<ExchangeRequest>> {
    let schedule = schedule_of_request(&app, id).await?;
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Request(id))?;
            Ok(workflow::resolve_swap(r, ctx.caller, id, b.approve)?)
        })
        .await?;
    tagged(&app, done, schedule).await
}

pub async fn cancel(State(app): State<AppState>, ctx: Ctx, P(id): P<RequestId>) -> ApiResult<Tagged<ExchangeRequest>> {
    let schedule = schedule_of_request(&app, id).await?;
    let done = app
        .write(ctx.expect(schedule), move |r| {
            ctx.allow(r, &Target::Request(id))?;
            Ok(workflow::cancel_request(r, ctx.caller, id)?)
        })
        .await?;
    tagged(&app, done, schedule).await
}

pub async fn list_time_off(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Vec<TimeOff>>> {
    let snap = app.read().await?;
    let r = &snap.roster;
    Ok(Json(
        r.time_off.values().filter(|t| t.account == ctx.caller || rights::can_approve_time_off_for(r, ctx.caller, t.account)).cloned().collect(),
    ))
}

#[derive(Deserialize)]
pub struct TimeOffBody {
    /// Defaults to the caller.
    #[serde(default)]
    pub account: Option<AccountId>,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default)]
    pub reason: String,
}

pub async fn request_time_off(State(app): State<AppState>, ctx: Ctx, Body(b): Body<TimeOffBody>) -> ApiResult<Json<TimeOff>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            Ok(workflow::request_time_off(r, ctx.caller, b.account.unwrap_or(ctx.caller), b.start, b.end, &b.reason)?)
        })
        .await?;
    Ok(Json(done.value))
}

#[derive(Deserialize)]
pub struct DecisionBody {
    pub decision: Decision,
}

pub async fn resolve_time_off(State(app): State<AppState>, ctx: Ctx, P(id): P<TimeOffId>, Body(b): Body<DecisionBody>) -> ApiResult<Json<TimeOff>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::TimeOff(id))?;
            Ok(workflow::resolve_time_off(r, ctx.caller, id, b.decision)?)
        })
        .await?;
    Ok(Json(done.value))
}
