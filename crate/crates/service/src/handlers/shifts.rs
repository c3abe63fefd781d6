use std::collections::BTreeMap;

use axum::extract::State;
use axum::response::Response;
use axum::Json;
use rosterd_core::engine::{self, AutoScheduleOutcome, AutoScheduleParams, Candidate, ShiftCreation, ShiftDraft, ShiftPatch};
use rosterd_core::model::{AccountId, ScheduleId, ShiftId};
use rosterd_core::time::Timestamp;
use serde::{Deserialize, Serialize};

use super::{no_content, tagged, Body, ShiftView, Tagged, P, Q};
use crate::auth::{shift_schedule, Ctx, Target};
use crate::error::ApiResult;
use crate::AppState;

pub async fn create(State(app): State<AppState>, ctx: Ctx, Body(draft): Body<ShiftDraft>) -> ApiResult<Tagged<ShiftCreation>> {
    let schedule = draft.schedule;
    let expect = ctx.expect(schedule);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Schedule(schedule))?;
            Ok(engine::create_shift(r, ctx.caller, draft)?)
        })
        .await?;
    tagged(&app, done, schedule).await
}

/// Schedule of a shift, from a fresh snapshot; shifts never change schedule.
async fn schedule_of(app: &AppState, id: ShiftId) -> ApiResult<ScheduleId> {
    shift_schedule(&app.read().await?.roster, id)
}

pub async fn get(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>) -> ApiResult<Tagged<ShiftView>> {
    let snap = app.read().await?;
    ctx.allow(&snap.roster, &Target::Shift(id))?;
    let shift = snap.roster.shifts[&id].clone();
    let v = snap.version(shift.schedule);
    Ok(Tagged(shift.into(), Some(v)))
}

pub async fn update(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>, Body(patch): Body<ShiftPatch>) -> ApiResult<Tagged<ShiftView>> {
    let schedule = schedule_of(&app, id).await?;
    let expect = ctx.expect(schedule);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            Ok(ShiftView::from(engine::update_shift(r, ctx.caller, id, patch)?))
        })
        .await?;
    tagged(&app, done, schedule).await
}

pub async fn delete(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>) -> ApiResult<Response> {
    let schedule = schedule_of(&app, id).await?;
    let expect = ctx.expect(schedule);
    app.write(expect, move |r| {
        ctx.allow(r, &Target::Shift(id))?;
        engine::delete_shift(r, ctx.caller, id)?;
        Ok(())
    })
    .await?;
    Ok(no_content())
}

#[derive(Deserialize, Default)]
pub struct ForceQuery {
    #[serde(default)]
    pub force: bool,
}

pub async fn eligible(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>, Q(q): Q<ForceQuery>) -> ApiResult<Tagged<Vec<Candidate>>> {
    let snap = app.read().await?;
    ctx.allow(&snap.roster, &Target::Shift(id))?;
    let list = engine::eligible_accounts(&snap.roster, id, q.force)?;
    Ok(Tagged(list, Some(snap.version(snap.roster.shifts[&id].schedule))))
}

#[derive(Deserialize)]
pub struct AssignBody {
    pub account: AccountId,
    #[serde(default)]
    pub force: bool,
}

pub async fn assign(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>, Body(b): Body<AssignBody>) -> ApiResult<Tagged<ShiftView>> {
    let schedule = schedule_of(&app, id).await?;
    let expect = ctx.expect(schedule);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            Ok(ShiftView::from(engine::assign(r, ctx.caller, id, b.account, b.force)?))
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Deserialize)]
pub struct UnassignBody {
    pub account: AccountId,
}

pub async fn unassign(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>, Body(b): Body<UnassignBody>) -> ApiResult<Tagged<ShiftView>> {
    let schedule = schedule_of(&app, id).await?;
    let expect = ctx.expect(schedule);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            Ok(ShiftView::from(engine::unassign(r, id, b.account)?))
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Deserialize)]
pub struct SplitBody {
    pub at: Timestamp,
}

pub async fn split(State(app): State<AppState>, ctx: Ctx, P(id): P<ShiftId>, Body(b): Body<SplitBody>) -> ApiResult<Tagged<Vec<ShiftView>>> {
    let schedule = schedule_of(&app, id).await?;
    let expect = ctx.expect(schedule);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Shift(id))?;
            let (a, b) = engine::split_shift(r, ctx.caller, id, b.at)?;
            Ok(vec![ShiftView::from(a), ShiftView::from(b)])
        })
        .await?;
    tagged(&app, done, schedule).await
}

#[derive(Serialize)]
pub struct AutoSchedulePlan {
    #[serde(flatten)]
    pub outcome: AutoScheduleOutcome,
    /// Schedule versions the plan was computed against.
    pub versions: BTreeMap<ScheduleId, u64>,
}

pub async fn autoschedule_preview(State(app): State<AppState>, ctx: Ctx, Body(params): Body<AutoScheduleParams>) -> ApiResult<Json<AutoSchedulePlan>> {
    let snap = app.read().await?;
    ctx.allow(&snap.roster, &Target::Schedules(params.schedules.iter().copied().collect()))?;
    let outcome = engine::plan_auto_schedule(&snap.roster, ctx.caller, &params)?;
    let versions = params.schedules.iter().map(|s| (*s, snap.version(*s))).collect();
    Ok(Json(AutoSchedulePlan { outcome, versions }))
}

#[derive(Deserialize)]
pub struct ApplyBody {
    #[serde(flatten)]
    pub params: AutoScheduleParams,
    /// When given, the run fails with a version conflict if any schedule moved.
    #[serde(default)]
    pub versions: Option<BTreeMap<ScheduleId, u64>>,
}

pub async fn autoschedule_apply(State(app): State<AppState>, ctx: Ctx, Body(b): Body<ApplyBody>) -> ApiResult<Json<AutoSchedulePlan>> {
    let expect: Vec<(ScheduleId, u64)> = b.versions.iter().flatten().map(|(s, v)| (*s, *v)).collect();
    let params = b.params;
    let scope: Vec<ScheduleId> = params.schedules.iter().copied().collect();
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Schedules(params.schedules.iter().copied().collect()))?;
            Ok(engine::auto_schedule(r, ctx.caller, &params)?)
        })
        .await?;
    let snap = app.read().await?;
    let versions = scope.iter().map(|s| (*s, done.touched.get(s).copied().unwrap_or_else(|| snap.version(*s)))).collect();
    Ok(Json(AutoSchedulePlan { outcome: done.value, versions }))
}
