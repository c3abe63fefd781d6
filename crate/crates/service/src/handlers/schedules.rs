use axum::extract::State;
use axum::response::Response;
use axum::Json;
use chrono::NaiveDate;
use rosterd_core::engine::{self, CopyMode, CopyOutcome};
use rosterd_core::model::{AccountId, Color, ElevatedRights, LocationId, Roster, Schedule, ScheduleId, ScheduleSettings};
use rosterd_core::rights;
use rosterd_core::time::Interval;
use rosterd_store::Snapshot;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{shifts_in, tagged, typed, Body, RangeQuery, ShiftView, Tagged, P, Q};
use crate::auth::{Ctx, Target};
use crate::error::{ApiError, ApiResult};
use crate::AppState;

#[derive(Serialize)]
pub struct ScheduleView {
    #[serde(flatten)]
    pub schedule: Schedule,
    pub version: u64,
}

fn view(snap: &Snapshot, id: ScheduleId) -> ApiResult<ScheduleView> {
    Ok(ScheduleView { schedule: snap.roster.schedule(id)?.clone(), version: snap.version(id) })
}

pub async fn list(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Vec<ScheduleView>>> {
    let snap = app.read().await?;
    let r = &snap.roster;
    let ids: Vec<ScheduleId> = r.schedules.keys().copied().filter(|s| rights::can_view(r, ctx.caller, *s)).collect();
    Ok(Json(ids.into_iter().map(|s| view(&snap, s)).collect::<ApiResult<_>>()?))
}

#[derive(Deserialize)]
pub struct NewSchedule {
    pub name: String,
    #[serde(default)]
    pub location: Option<LocationId>,
}

pub async fn create(State(app): State<AppState>, ctx: Ctx, Body(b): Body<NewSchedule>) -> ApiResult<Tagged<Schedule>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            let id = r.add_schedule(&b.name, b.location)?;
            Ok(r.schedules[&id].clone())
        })
        .await?;
    let id = done.value.id;
    tagged(&app, done, id).await
}

pub async fn get(State(app): State<AppState>, ctx: Ctx, P(id): P<ScheduleId>) -> ApiResult<Tagged<ScheduleView>> {
    let snap = app.read().await?;
    ctx.allow(&snap.roster, &Target::Schedule(id))?;
    let v = view(&snap, id)?;
    let version = v.version;
    Ok(Tagged(v, Some(version)))
}

/// Runs a manager mutation on one schedule and answers with its new state.
async fn mutate_schedule(
    app: &AppState,
    ctx: Ctx,
    id: ScheduleId,
    f: impl FnOnce(&mut Roster) -> ApiResult<()> + Send + 'static,
) -> ApiResult<Tagged<Schedule>> {
    let expect = ctx.expect(id);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Schedule(id))?;
            f(r)?;
            Ok(r.schedules[&id].clone())
        })
        .await?;
    tagged(app, done, id).await
}

pub async fn put_settings(State(app): State<AppState>, ctx: Ctx, P(id): P<ScheduleId>, Body(settings): Body<ScheduleSettings>) -> ApiResult<Tagged<Schedule>> {
    mutate_schedule(&app, ctx, id, move |r| {
        r.schedules.get_mut(&id).expect("authorized").settings = settings;
        Ok(())
    })
    .await
}

#[derive(Deserialize)]
pub struct MemberBody {
    pub account: AccountId,
}

pub async fn add_member(State(app): State<AppState>, ctx: Ctx, P(id): P<ScheduleId>, Body(b): Body<MemberBody>) -> ApiResult<Tagged<Schedule>> {
    mutate_schedule(&app, ctx, id, move |r| Ok(r.add_member(id, b.account)?)).await
}

pub async fn remove_member(State(app): State<AppState>, ctx: Ctx, P((id, account)): P<(ScheduleId, AccountId)>) -> ApiResult<Tagged<Schedule>> {
    mutate_schedule(&app, ctx, id, move |r| Ok(r.remove_member(id, account)?)).await
}

pub async fn grant(
    State(app): State<AppState>,
    ctx: Ctx,
    P((id, account)): P<(ScheduleId, AccountId)>,
    Body(rights): Body<ElevatedRights>,
) -> ApiResult<Tagged<Schedule>> {
    let expect = ctx.expect(id);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::None)?;
            Ok(r.grant_rights(id, account, rights)?.clone())
        })
        .await?;
    tagged(&app, done, id).await
}

#[derive(Deserialize)]
pub struct PublishBody {
    pub public: bool,
}

#[derive(Serialize)]
pub struct Publication {
    pub schedule: ScheduleId,
    pub public: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed: Option<String>,
}

pub fn public_url(base: &str, id: ScheduleId) -> String {
    format!("{}/public/schedules/{id}", base.trim_end_matches('/'))
}

pub fn embed_snippet(base: &str, id: ScheduleId) -> String {
    format!(r#"<iframe src="{}/embed" width="100%" height="600" style="border:0" title="schedule {id}"></iframe>"#, public_url(base, id))
}

pub async fn publish(State(app): State<AppState>, ctx: Ctx, P(id): P<ScheduleId>, Body(b): Body<PublishBody>) -> ApiResult<Tagged<Publication>> {
    let Tagged(schedule, version) = mutate_schedule(&app, ctx, id, move |r| {
        r.schedules.get_mut(&id).expect("authorized").is_public = b.public;
        Ok(())
    })
    .await?;
    let base = &app.config.public_base_url;
    let public = schedule.is_public;
    Ok(Tagged(
        Publication { schedule: id, public, url: public.then(|| public_url(base, id)), embed: public.then(|| embed_snippet(base, id)) },
        version,
    ))
}

#[derive(Serialize)]
pub struct SetupStep {
    pub step: &'static str,
    pub done: bool,
}

pub async fn setup(State(app): State<AppState>, ctx: Ctx, P(id): P<ScheduleId>) -> ApiResult<Json<Value>> {
    let snap = app.read().await?;
    let r = &snap.roster;
    ctx.allow(r, &Target::Schedule(id))?;
    let s = r.schedule(id)?;
    let steps = [
        SetupStep { step: "opening_hours", done: !r.opening_hours.is_empty() },
        SetupStep { step: "shifts", done: r.shifts.values().any(|x| x.schedule == id) },
        SetupStep { step: "members", done: !s.members.is_empty() },
        SetupStep { step: "publish", done: s.is_public },
    ];
    let next = steps.iter().find(|s| !s.done).map(|s| s.step);
    Ok(Json(json!({ "schedule": id, "steps": steps, "next": next })))
}

#[derive(Deserialize)]
pub struct CopyWeekBody {
    pub source_week: NaiveDate,
    pub target_weeks: Vec<NaiveDate>,
    pub mode: CopyMode,
}

pub async fn copy_week(State(app): State<AppState>, ctx: Ctx, P(id): P<ScheduleId>, Body(b): Body<CopyWeekBody>) -> ApiResult<Tagged<CopyOutcome>> {
    let expect = ctx.expect(id);
    let done = app
        .write(expect, move |r| {
            ctx.allow(r, &Target::Schedule(id))?;
            Ok(engine::copy_week(r, ctx.caller, id, b.source_week, &b.target_weeks, b.mode)?)
        })
        .await?;
    tagged(&app, done, id).await
}

pub async fn shifts(State(app): State<AppState>, ctx: Ctx, P(id): P<ScheduleId>, Q(q): Q<RangeQuery>) -> ApiResult<Tagged<Vec<ShiftView>>> {
    let range = q.parse()?;
    let snap = app.read().await?;
    ctx.allow(&snap.roster, &Target::Schedule(id))?;
    let list = shifts_in(&snap.roster, id, range.as_ref()).into_iter().map(ShiftView::from).collect();
    Ok(Tagged(list, Some(snap.version(id))))
}

#[derive(Serialize)]
pub struct PublicAssignee {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
}

#[derive(Serialize)]
pub struct PublicShift {
    pub id: rosterd_core::model::ShiftId,
    pub title: String,
    pub interval: Interval,
    pub understaffed: bool,
    pub assignees: Vec<PublicAssignee>,
}

#[derive(Serialize)]
pub struct PublicSchedule {
    pub id: ScheduleId,
    pub name: String,
    pub shifts: Vec<PublicShift>,
}

/// The read-only projection: names and colors only.
fn public_projection(r: &Roster, id: ScheduleId, q: &RangeQuery) -> ApiResult<PublicSchedule> {
    let s = r.schedules.get(&id).filter(|s| s.is_public).ok_or_else(ApiError::not_found)?;
    let range = q.parse()?;
    let shifts = shifts_in(r, id, range.as_ref())
        .into_iter()
        .map(|sh| PublicShift {
            id: sh.id,
            title: sh.title.clone(),
            interval: sh.interval,
            understaffed: sh.is_understaffed(),
            assignees: sh
                .assignments
                .iter()
                .map(|a| PublicAssignee { name: r.account_label(*a), color: r.accounts.get(a).and_then(|x| x.color.clone()) })
                .collect(),
        })
        .collect();
    Ok(PublicSchedule { id, name: s.name.clone(), shifts })
}

pub async fn public_view(State(app): State<AppState>, P(id): P<ScheduleId>, Q(q): Q<RangeQuery>) -> ApiResult<Json<PublicSchedule>> {
    Ok(Json(public_projection(&app.read().await?.roster, id, &q)?))
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;").replace('\'', "&#39;")
}

pub async fn public_embed(State(app): State<AppState>, P(id): P<ScheduleId>, Q(q): Q<RangeQuery>) -> ApiResult<Response> {
    let snap = app.read().await?;
    let p = public_projection(&snap.roster, id, &q)?;
    let zone = snap.roster.settings.display_zone;
    let mut rows = String::new();
    for sh in &p.shifts {
        let names: Vec<String> = sh.assignees.iter().map(|a| html_escape(&a.name)).collect();
        rows.push_str(&format!(
            "<tr{}><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
            if sh.understaffed { r#" class="understaffed""# } else { "" },
            sh.interval.start.local(zone).format("%Y-%m-%d %H:%M"),
            sh.interval.end.local(zone).format("%H:%M"),
            html_escape(&sh.title),
            names.join(", "),
        ));
    }
    let page = format!(
        "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>{name}</title></head>\n<body><h1>{name}</h1>\n<table>\n<tr><th>start</th><th>end</th><th>shift</th><th>staff</th></tr>\n{rows}</table></body></html>\n",
        name = html_escape(&p.name),
    );
    Ok(typed("text/html; charset=utf-8", page))
}
