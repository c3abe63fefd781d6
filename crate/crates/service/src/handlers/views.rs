use std::collections::BTreeSet;

use axum::extract::State;
use axum::response::Response;
use axum::Json;
use rosterd_core::calendar::{self, OpenHours, OverlapAdvisory};
use rosterd_core::engine::{check_assignment, ConflictReport};
use rosterd_core::ical;
use rosterd_core::model::{AccountId, Announcement, Color, Roster, ScheduleId, Shift, ShiftId};
use rosterd_core::notify;
use rosterd_core::report::{self, Report, ReportQuery};
use rosterd_core::rights;
use rosterd_core::time::{Interval, Timestamp};
use rosterd_core::workflow::WorkflowError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::admin::visible_announcements;
use super::exchange::{visible_requests, RequestView};
use super::{typed, Body, RangeQuery, ShiftView, Text, P, Q};
use crate::auth::{Ctx, Target};
use crate::error::{ApiError, ApiResult};
use crate::AppState;

pub async fn open_hours_total(State(app): State<AppState>, Q(q): Q<RangeQuery>) -> ApiResult<Json<OpenHours>> {
    let range = q.required()?;
    Ok(Json(calendar::annual_open_hours(&app.read().await?.roster.opening_hours, &range)))
}

pub async fn export_ical(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>, Q(q): Q<RangeQuery>) -> ApiResult<Response> {
    let range = q.required()?;
    let snap = app.read().await?;
    ctx.allow(&snap.roster, &Target::Account(id))?;
    let text = ical::export_ical(&snap.roster, id, &range, app.now())?;
    Ok(typed("text/calendar; charset=utf-8", text))
}

pub async fn import_ical(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>, Text(text): Text) -> ApiResult<Json<ical::ImportOutcome>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::Account(id))?;
            if id == ctx.caller && !r.settings.self_time_off_enabled && !rights::is_admin(r, ctx.caller) {
                return Err(WorkflowError::SelfEntryDisabled.into());
            }
            Ok(ical::import_ical_time_off(r, id, &text)?)
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn set_external_calendar(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>, Text(text): Text) -> ApiResult<Json<Value>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::Account(id))?;
            Ok(ical::set_external_calendar(r, id, &text)?)
        })
        .await?;
    Ok(Json(json!({ "account": id, "events": done.value.events.len(), "warnings": done.value.warnings })))
}

#[derive(Deserialize)]
pub struct ExternalCheck {
    pub calendar: String,
    pub interval: Interval,
}

pub async fn external_conflicts(State(app): State<AppState>, Body(b): Body<ExternalCheck>) -> ApiResult<Json<Vec<ConflictReport>>> {
    let zone = app.read().await?.roster.settings.display_zone;
    Ok(Json(ical::external_conflicts(&b.calendar, zone, &b.interval)?))
}

fn run(r: &Roster, ctx: &Ctx, query: &ReportQuery) -> ApiResult<Report> {
    ctx.allow(r, &Target::Schedules(query.schedules.iter().copied().collect()))?;
    Ok(report::run_report(r, ctx.caller, query)?)
}

pub async fn report(State(app): State<AppState>, ctx: Ctx, Body(query): Body<ReportQuery>) -> ApiResult<Json<Report>> {
    Ok(Json(run(&app.read().await?.roster, &ctx, &query)?))
}

pub async fn report_csv(State(app): State<AppState>, ctx: Ctx, Body(query): Body<ReportQuery>) -> ApiResult<Response> {
    let report = run(&app.read().await?.roster, &ctx, &query)?;
    Ok(typed("text/csv; charset=utf-8", report.to_csv()))
}

pub async fn advisory(State(app): State<AppState>, ctx: Ctx, Q(q): Q<RangeQuery>) -> ApiResult<Json<Vec<OverlapAdvisory>>> {
    let range = q.parse()?;
    let snap = app.read().await?;
    let r = &snap.roster;
    ctx.allow(r, &Target::None)?;
    let list = calendar::timeoff_assignment_overlaps(r, range.as_ref())
        .into_iter()
        .filter(|a| r.shifts.get(&a.shift).is_some_and(|s| rights::can_manage(r, ctx.caller, s.schedule)))
        .collect();
    Ok(Json(list))
}

#[derive(Deserialize, Default)]
pub struct DashboardQuery {
    #[serde(default)]
    pub days: Option<u32>,
}

#[derive(Serialize)]
pub struct Dashboard {
    pub from: Timestamp,
    pub until: Timestamp,
    pub days: u32,
    /// The caller's assignments starting inside the window.
    pub shifts: Vec<ShiftView>,
    /// Understaffed shifts in the window the caller could claim now.
    pub claimable: Vec<ShiftView>,
    pub requests: Vec<RequestView>,
    pub announcements: Vec<Announcement>,
}

pub fn dashboard_for(r: &Roster, caller: AccountId, now: Timestamp, days: u32) -> Dashboard {
    let until = now.plus_minutes(i64::from(days) * 1440);
    let in_window = |s: &Shift| now <= s.interval.start && s.interval.start < until;
    let mut shifts: Vec<Shift> = r.assignments_of(caller).filter(|s| in_window(s)).cloned().collect();
    shifts.sort_by_key(|s| (s.interval.start, s.id));
    let mut claimable: Vec<Shift> = r
        .shifts
        .values()
        .filter(|s| in_window(s) && s.is_understaffed() && !s.assignments.contains(&caller))
        .filter(|s| r.schedules.get(&s.schedule).is_some_and(|x| x.settings.claiming_enabled && x.members.contains(&caller)))
        .filter(|s| check_assignment(r, caller, s.id, caller, false).is_ok())
        .cloned()
        .collect();
    claimable.sort_by_key(|s| (s.interval.start, s.id));
    let requests = visible_requests(r, caller).into_iter().filter(|q| q.request.state.is_live()).collect();
    Dashboard {
        from: now,
        until,
        days,
        shifts: shifts.into_iter().map(ShiftView::from).collect(),
        claimable: claimable.into_iter().map(ShiftView::from).collect(),
        requests,
        announcements: visible_announcements(r, caller),
    }
}

pub async fn dashboard(State(app): State<AppState>, ctx: Ctx, Q(q): Q<DashboardQuery>) -> ApiResult<Json<Dashboard>> {
    let snap = app.read().await?;
    let days = q.days.unwrap_or(snap.roster.settings.default_dashboard_days);
    if days == 0 {
        return Err(ApiError::new("bad_dashboard_days"));
    }
    Ok(Json(dashboard_for(&snap.roster, ctx.caller, app.now(), days)))
}

#[derive(Deserialize)]
pub struct TimelineQuery {
    /// Comma-separated schedule ids.
    pub schedules: String,
    pub range: String,
    #[serde(default)]
    pub account: Option<AccountId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimelineEvent {
    /// `None` for an open slot on an unstaffed shift.
    pub account: Option<AccountId>,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    pub schedule: ScheduleId,
    pub schedule_name: String,
    pub shift: ShiftId,
    pub title: String,
    pub interval: Interval,
    pub understaffed: bool,
}

#[derive(Serialize)]
pub struct Lane {
    pub account: Option<AccountId>,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    pub events: Vec<TimelineEvent>,
}

#[derive(Serialize)]
pub struct Timeline {
    pub events: Vec<TimelineEvent>,
    pub lanes: Vec<Lane>,
}

pub fn timeline_for(r: &Roster, schedules: &[ScheduleId], window: &Interval, account: Option<AccountId>) -> Timeline {
    let mut events = Vec::new();
    for sid in schedules {
        let Some(sched) = r.schedules.get(sid) else { continue };
        for s in r.shifts.values().filter(|s| s.schedule == *sid && s.interval.overlaps(window)) {
            let mut people: Vec<Option<AccountId>> = s.assignments.iter().copied().map(Some).collect();
            if people.is_empty() {
                people.push(None);
            }
            for who in people {
                if account.is_some() && who != account {
                    continue;
                }
                events.push(TimelineEvent {
                    account: who,
                    label: who.map(|a| r.account_label(a)).unwrap_or_default(),
                    color: who.and_then(|a| r.accounts.get(&a)).and_then(|a| a.color.clone()),
                    schedule: *sid,
                    schedule_name: sched.name.clone(),
                    shift: s.id,
                    title: s.title.clone(),
                    interval: s.interval,
                    understaffed: s.is_understaffed(),
                });
            }
        }
    }
    events.sort_by_key(|e| (e.interval.start, e.interval.end, e.schedule, e.shift, e.account));
    let keys: BTreeSet<Option<AccountId>> = events.iter().map(|e| e.account).collect();
    let lanes = keys
        .into_iter()
        .map(|k| {
            let mine: Vec<TimelineEvent> = events.iter().filter(|e| e.account == k).cloned().collect();
            Lane { account: k, label: mine[0].label.clone(), color: mine[0].color.clone(), events: mine }
        })
        .collect();
    Timeline { events, lanes }
}

pub async fn timeline(State(app): State<AppState>, ctx: Ctx, Q(q): Q<TimelineQuery>) -> ApiResult<Json<Timeline>> {
    let range = RangeQuery { range: Some(q.range.clone()) }.required()?;
    let ids = q
        .schedules
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<ScheduleId>().map_err(|_| ApiError::bad_request(format!("bad schedule id {s:?}"))))
        .collect::<ApiResult<Vec<_>>>()?;
    let snap = app.read().await?;
    let r = &snap.roster;
    for id in &ids {
        let s = r.schedule(*id)?;
        if !s.is_public && !rights::can_view(r, ctx.caller, *id) {
            return Err(ApiError::forbidden());
        }
    }
    let window = range.to_interval(r.settings.display_zone);
    Ok(Json(timeline_for(r, &ids, &window, q.account)))
}

#[derive(Serialize)]
pub struct NotificationView {
    pub seq: u64,
    pub template: String,
    pub subject: String,
    pub body: String,
    pub delivered: bool,
}

pub async fn notifications(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Vec<NotificationView>>> {
    let snap = app.read().await?;
    let mut out = Vec::new();
    for e in snap.roster.outbox.iter().filter(|e| e.notification.recipient == ctx.caller) {
        let n = &e.notification;
        let (subject, body) = notify::render(n.locale, &n.template, &n.payload).map_err(|e| ApiError::new("internal").with("detail", e.to_string()))?;
        out.push(NotificationView { seq: e.seq, template: n.template.clone(), subject, body, delivered: e.delivered });
    }
    Ok(Json(out))
}
