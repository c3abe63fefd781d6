use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use rosterd_core::engine::EngineError;
use rosterd_core::ical::IcalError;
use rosterd_core::model::DomainError;
use rosterd_core::report::ReportError;
use rosterd_core::workflow::WorkflowError;
use rosterd_store::{StoreError, TxError};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::i18n;

/// An error answer: a stable code, structured details and an HTTP status.
/// The human message is rendered per request locale by [`i18n::localize`].
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub details: Map<String, Value>,
}

pub type ApiResult<T> = Result<T, ApiError>;

/// Attached to error responses so the locale layer can re-render them.
#[derive(Clone, Debug)]
pub struct ErrorInfo(pub ApiError);

impl ApiError {
    pub fn new(code: &str) -> Self {
        ApiError { status: status_of(code), code: code.to_string(), details: Map::new() }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn bad_request(detail: impl ToString) -> Self {
        ApiError::new("bad_request").with("detail", detail.to_string())
    }

    pub fn forbidden() -> Self {
        ApiError::new("forbidden")
    }

    pub fn not_found() -> Self {
        ApiError::new("not_found")
    }

    /// Converts any `#[serde(tag = "code")]` domain error.
    pub fn tagged<E: Serialize + std::fmt::Display>(e: &E) -> Self {
        match serde_json::to_value(e) {
            Ok(Value::Object(mut map)) => {
                let code = map.remove("code").and_then(|c| c.as_str().map(String::from)).unwrap_or_else(|| "internal".into());
                ApiError { status: status_of(&code), code, details: map }
            }
            _ => ApiError::new("internal").with("detail", e.to_string()),
        }
    }

    pub fn body(&self, locale: rosterd_core::model::Locale) -> Value {
        let mut body = Map::new();
        body.insert("code".into(), Value::String(self.code.clone()));
        body.insert("message".into(), Value::String(i18n::message(locale, &self.code, &self.details)));
        if !self.details.is_empty() {
            body.insert("details".into(), Value::Object(self.details.clone()));
        }
        Value::Object(body)
    }
}

pub fn status_of(code: &str) -> StatusCode {
    match code {
        "unauthenticated" | "bad_credentials" => StatusCode::UNAUTHORIZED,
        "forbidden" | "forbidden_force" | "ip_not_allowed" => StatusCode::FORBIDDEN,
        "not_found" => StatusCode::NOT_FOUND,
        c if c.starts_with("unknown_") => StatusCode::NOT_FOUND,
        "version_conflict" => StatusCode::PRECONDITION_FAILED,
        "bad_request" => StatusCode::BAD_REQUEST,
        "storage" | "internal" | "delivery_failed" => StatusCode::INTERNAL_SERVER_ERROR,
        "malformed_calendar" | "malformed_color" | "quota_inconsistent" | "quota_not_positive" | "overlapping_availability" | "bad_pay_rates"
        | "empty_field" | "cascade_violation" | "bad_dashboard_days" | "bad_opening_hours" | "split_out_of_range" | "empty_range"
        | "empty_interval" | "invalid_params" | "duplicate_group_by" | "validation" => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::CONFLICT,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = self.body(rosterd_core::model::Locale::En);
        let mut response = (self.status, Json(body)).into_response();
        response.extensions_mut().insert(ErrorInfo(self));
        response
    }
}

macro_rules! tagged_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                ApiError::tagged(&e)
            }
        }
    )*};
}
tagged_from!(EngineError, WorkflowError, DomainError, ReportError, IcalError);

impl From<Vec<DomainError>> for ApiError {
    fn from(errors: Vec<DomainError>) -> Self {
        if errors.len() == 1 {
            return ApiError::tagged(&errors[0]);
        }
        ApiError::new("validation").with("errors", &errors)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!("store: {e}");
        ApiError::new("storage").with("detail", e.to_string())
    }
}

impl From<TxError<ApiError>> for ApiError {
    fn from(e: TxError<ApiError>) -> Self {
        match e {
            TxError::VersionConflict { schedule, expected, actual } => {
                ApiError::new("version_conflict").with("schedule", schedule).with("expected", expected).with("actual", actual)
            }
            TxError::Domain(e) => e,
            TxError::Store(e) => e.into(),
        }
    }
}

impl From<rosterd_core::time::TimeError> for ApiError {
    fn from(e: rosterd_core::time::TimeError) -> Self {
        ApiError::bad_request(e)
    }
}
