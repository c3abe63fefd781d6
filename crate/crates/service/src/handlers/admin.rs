use std::collections::BTreeSet;

use axum::extract::State;
use axum::Json;
use rosterd_core::model::{
    Account, AccountId, Announcement, AnnouncementId, Audience, AvailabilityGrid, Color, Department, Location, OpeningHoursCalendar, Position,
    PositionId, Roster, SystemSettings,
};
use rosterd_core::notify::{self, FileSink};
use rosterd_core::rights;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Body, P};
use crate::auth::{self, Ctx, Target};
use crate::error::{ApiError, ApiResult};
use crate::AppState;

pub async fn get_settings(State(app): State<AppState>) -> ApiResult<Json<SystemSettings>> {
    Ok(Json(app.read().await?.roster.settings.clone()))
}

pub async fn put_settings(State(app): State<AppState>, ctx: Ctx, Body(settings): Body<SystemSettings>) -> ApiResult<Json<SystemSettings>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            r.set_settings(settings)?;
            Ok(r.settings.clone())
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn get_opening_hours(State(app): State<AppState>) -> ApiResult<Json<OpeningHoursCalendar>> {
    Ok(Json(app.read().await?.roster.opening_hours.clone()))
}

pub async fn put_opening_hours(State(app): State<AppState>, ctx: Ctx, Body(cal): Body<OpeningHoursCalendar>) -> ApiResult<Json<OpeningHoursCalendar>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            r.set_opening_hours(cal)?;
            Ok(r.opening_hours.clone())
        })
        .await?;
    Ok(Json(done.value))
}

#[derive(Deserialize)]
pub struct Named {
    pub name: String,
    #[serde(default)]
    pub default_color: Option<String>,
}

pub async fn list_locations(State(app): State<AppState>) -> ApiResult<Json<Vec<Location>>> {
    Ok(Json(app.read().await?.roster.locations.values().cloned().collect()))
}

pub async fn add_location(State(app): State<AppState>, ctx: Ctx, Body(b): Body<Named>) -> ApiResult<Json<Location>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            let id = r.add_location(&b.name)?;
            Ok(r.locations[&id].clone())
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn list_departments(State(app): State<AppState>) -> ApiResult<Json<Vec<Department>>> {
    Ok(Json(app.read().await?.roster.departments.values().cloned().collect()))
}

pub async fn add_department(State(app): State<AppState>, ctx: Ctx, Body(b): Body<Named>) -> ApiResult<Json<Department>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            let id = r.add_department(&b.name)?;
            Ok(r.departments[&id].clone())
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn list_positions(State(app): State<AppState>) -> ApiResult<Json<Vec<Position>>> {
    Ok(Json(app.read().await?.roster.positions.values().cloned().collect()))
}

pub async fn add_position(State(app): State<AppState>, ctx: Ctx, Body(b): Body<Named>) -> ApiResult<Json<Position>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            let id = r.add_position(&b.name, b.default_color.as_deref())?;
            Ok(r.positions[&id].clone())
        })
        .await?;
    Ok(Json(done.value))
}

#[derive(Deserialize)]
pub struct ColorBody {
    pub color: String,
}

pub async fn position_color(State(app): State<AppState>, ctx: Ctx, P(id): P<PositionId>, Body(b): Body<ColorBody>) -> ApiResult<Json<Value>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            Ok(r.apply_position_color(id, &b.color)?)
        })
        .await?;
    Ok(Json(json!({ "position": id, "updated": done.value })))
}

/// The directory entry other accounts may see.
#[derive(Serialize)]
pub struct AccountSummary {
    pub id: AccountId,
    pub given_name: String,
    pub family_name: String,
    pub display_name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    pub positions: BTreeSet<PositionId>,
    pub anonymized: bool,
}

impl From<&Account> for AccountSummary {
    fn from(a: &Account) -> Self {
        AccountSummary {
            id: a.id,
            given_name: a.given_name.clone(),
            family_name: a.family_name.clone(),
            display_name: a.display_name(),
            color: a.color.clone(),
            positions: a.positions.clone(),
            anonymized: a.anonymized,
        }
    }
}

pub async fn list_accounts(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Value>> {
    let snap = app.read().await?;
    let r = &snap.roster;
    let body = if rights::is_admin(r, ctx.caller) {
        serde_json::to_value(r.accounts.values().collect::<Vec<_>>())
    } else {
        serde_json::to_value(r.accounts.values().map(AccountSummary::from).collect::<Vec<_>>())
    };
    Ok(Json(body.map_err(|e| ApiError::new("internal").with("detail", e.to_string()))?))
}

/// Reads an account record from a JSON object, ignoring any `id` in it.
fn account_from(mut map: Map<String, Value>, id: AccountId) -> ApiResult<Account> {
    map.insert("id".into(), json!(id));
    serde_json::from_value(Value::Object(map)).map_err(ApiError::bad_request)
}

pub async fn create_account(State(app): State<AppState>, ctx: Ctx, Body(mut map): Body<Map<String, Value>>) -> ApiResult<Json<Account>> {
    ctx.allow(&app.read().await?.roster, &Target::None)?;
    let password = match map.remove("password") {
        Some(Value::String(p)) => Some(p),
        Some(_) => return Err(ApiError::bad_request("password must be a string")),
        None => None,
    };
    account_from(map.clone(), AccountId(0))?;
    let hash = match password {
        Some(p) => Some(tokio::task::spawn_blocking(move || auth::hash_password(&p)).await.map_err(|e| ApiError::new("internal").with("detail", e.to_string()))??),
        None => None,
    };
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            let id = AccountId(r.allocate());
            let id = r.upsert_account(account_from(map, id)?)?;
            if let Some(h) = hash {
                r.auth.password_hashes.insert(id, h);
            }
            Ok(r.accounts[&id].clone())
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn get_account(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>) -> ApiResult<Json<Account>> {
    let snap = app.read().await?;
    ctx.allow(&snap.roster, &Target::Account(id))?;
    Ok(Json(snap.roster.account(id)?.clone()))
}

pub async fn update_account(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>, Body(map): Body<Map<String, Value>>) -> ApiResult<Json<Account>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            r.account(id)?;
            r.upsert_account(account_from(map, id)?)?;
            Ok(r.accounts[&id].clone())
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn delete_account(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>) -> ApiResult<Json<Value>> {
    let now = app.now();
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            Ok(r.delete_account(id, now)?)
        })
        .await?;
    Ok(Json(json!({ "account": id, "tombstone": done.value })))
}

pub async fn anonymize_account(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>) -> ApiResult<Json<Account>> {
    let now = app.now();
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            Ok(r.anonymize_account(id, now)?)
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn set_availability(State(app): State<AppState>, ctx: Ctx, P(id): P<AccountId>, Body(grid): Body<AvailabilityGrid>) -> ApiResult<Json<Account>> {
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::Account(id))?;
            let mut account = r.account(id)?.clone();
            account.availability = grid;
            r.upsert_account(account)?;
            Ok(r.accounts[&id].clone())
        })
        .await?;
    Ok(Json(done.value))
}

pub fn visible_announcements(r: &Roster, caller: AccountId) -> Vec<Announcement> {
    let admin = rights::is_admin(r, caller);
    let mut out: Vec<Announcement> = r
        .announcements
        .values()
        .filter(|a| match &a.audience {
            Audience::All => true,
            Audience::Schedules(set) => admin || set.iter().any(|s| rights::can_view(r, caller, *s)),
        })
        .cloned()
        .collect();
    out.sort_by(|a, b| b.published_at.cmp(&a.published_at).then(b.id.cmp(&a.id)));
    out
}

pub async fn list_announcements(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Vec<Announcement>>> {
    Ok(Json(visible_announcements(&app.read().await?.roster, ctx.caller)))
}

#[derive(Deserialize)]
pub struct NewAnnouncement {
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default = "everyone")]
    pub audience: Audience,
}

fn everyone() -> Audience {
    Audience::All
}

pub async fn post_announcement(State(app): State<AppState>, ctx: Ctx, Body(b): Body<NewAnnouncement>) -> ApiResult<Json<Announcement>> {
    let now = app.now();
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            if b.title.trim().is_empty() {
                return Err(ApiError::new("empty_field").with("field", "title"));
            }
            if let Audience::Schedules(set) = &b.audience {
                for s in set {
                    r.schedule(*s)?;
                }
            }
            let id = AnnouncementId(r.allocate());
            let a = Announcement { id, author: ctx.caller, title: b.title.trim().to_string(), body: b.body, published_at: now, audience: b.audience };
            r.announcements.insert(id, a.clone());
            Ok(a)
        })
        .await?;
    Ok(Json(done.value))
}

pub async fn deliver_outbox(State(app): State<AppState>, ctx: Ctx) -> ApiResult<Json<Value>> {
    let path = app.config.outbox_file.clone();
    let done = app
        .write(vec![], move |r| {
            ctx.allow(r, &Target::None)?;
            let path = path.ok_or_else(|| ApiError::new("delivery_failed").with("detail", "no outbox file is configured"))?;
            let mut sink = FileSink::new(path);
            notify::deliver_pending(r, &mut sink).map_err(|e| ApiError::new("delivery_failed").with("detail", e.to_string()))
        })
        .await?;
    Ok(Json(json!({ "delivered": done.value })))
}
