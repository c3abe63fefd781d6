pub mod admin;
pub mod exchange;
pub mod schedules;
pub mod session;
pub mod shifts;
pub mod views;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request};
use axum::http::header::{CONTENT_TYPE, ETAG};
use axum::http::request::Parts;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use rosterd_core::model::{Roster, ScheduleId, Shift};
use rosterd_core::time::DateRange;
use rosterd_store::Committed;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::AppState;

/// JSON request body. An empty body reads as `{}`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        let raw: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
        serde_json::from_slice(raw).map(Body).map_err(ApiError::bad_request)
    }
}

/// Plain-text request body, for calendar uploads.
pub struct Text(pub String);

impl<S: Send + Sync> FromRequest<S> for Text {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        String::from_request(req, state).await.map(Text).map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

pub struct Q<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Q<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        Query::<T>::from_request_parts(parts, state).await.map(|Query(v)| Q(v)).map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

pub struct P<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for P<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        Path::<T>::from_request_parts(parts, state).await.map(|Path(v)| P(v)).map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

#[derive(Deserialize, Default)]
pub struct RangeQuery {
    pub range: Option<String>,
}

impl RangeQuery {
    pub fn parse(&self) -> ApiResult<Option<DateRange>> {
        self.range.as_deref().map(|s| s.parse::<DateRange>().map_err(ApiError::from)).transpose()
    }

    pub fn required(&self) -> ApiResult<DateRange> {
        self.parse()?.ok_or_else(|| ApiError::bad_request("range=YYYY-MM-DD..YYYY-MM-DD is required"))
    }
}

/// A JSON answer carrying the schedule version as its `ETag`.
pub struct Tagged<T>(pub T, pub Option<u64>);

impl<T: Serialize> IntoResponse for Tagged<T> {
    fn into_response(self) -> Response {
        let mut response = Json(self.0).into_response();
        if let Some(v) = self.1 {
            if let Ok(h) = HeaderValue::from_str(&format!("\"{v}\"")) {
                response.headers_mut().insert(ETAG, h);
            }
        }
        response
    }
}

/// The version of `schedule` after a write, read back when nothing changed.
pub async fn version_after<T>(app: &AppState, done: &Committed<T>, schedule: ScheduleId) -> ApiResult<u64> {
    match done.touched.get(&schedule) {
        Some(v) => Ok(*v),
        None => Ok(app.read().await?.version(schedule)),
    }
}

pub async fn tagged<T: Serialize>(app: &AppState, done: Committed<T>, schedule: ScheduleId) -> ApiResult<Tagged<T>> {
    let v = version_after(app, &done, schedule).await?;
    Ok(Tagged(done.value, Some(v)))
}

pub fn no_content() -> Response {
    StatusCode::NO_CONTENT.into_response()
}

pub fn typed(content_type: &'static str, body: String) -> Response {
    ([(CONTENT_TYPE, HeaderValue::from_static(content_type))], body).into_response()
}

/// A shift as the clients see it, with its staffing verdict.
#[derive(Serialize)]
pub struct ShiftView {
    #[serde(flatten)]
    pub shift: Shift,
    pub understaffed: bool,
    pub open_slots: u32,
}

impl From<Shift> for ShiftView {
    fn from(shift: Shift) -> Self {
        ShiftView { understaffed: shift.is_understaffed(), open_slots: shift.open_slots(), shift }
    }
}

/// Shifts of `schedule` overlapping `range` (whole days in the display zone), by start.
pub fn shifts_in(r: &Roster, schedule: ScheduleId, range: Option<&DateRange>) -> Vec<Shift> {
    let window = range.map(|d| d.to_interval(r.settings.display_zone));
    let mut out: Vec<Shift> =
        r.shifts.values().filter(|s| s.schedule == schedule && window.is_none_or(|w| w.overlaps(&s.interval))).cloned().collect();
    out.sort_by_key(|s| (s.interval.start, s.interval.end, s.id));
    out
}
