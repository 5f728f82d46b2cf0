use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use matchboard_core::board::BoardError;
use matchboard_core::io::IoError;
use matchboard_core::model::{MatrixError, ValidationReport};
use matchboard_core::schedule::ScheduleError;
use matchboard_core::score::ScoreError;
use matchboard_core::SolveError;

/// The error body every endpoint returns: a stable machine code, a human
/// message, and a structured payload.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }

    pub fn validation(report: &ValidationReport) -> Self {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "VALIDATION_FAILED",
            report.to_string(),
        )
        .with_details(serde_json::to_value(report).unwrap_or(Value::Null))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<SolveError> for ApiError {
    fn from(e: SolveError) -> Self {
        let details = match &e {
            SolveError::InfeasibleLocks { locations } => json!({ "locations": locations }),
            _ => Value::Null,
        };
        let status = match e {
            SolveError::Interrupted => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string()).with_details(details)
    }
}

impl From<BoardError> for ApiError {
    fn from(e: BoardError) -> Self {
        match e {
            BoardError::Solve(inner) => inner.into(),
            BoardError::Conflict { expected, current } => {
                ApiError::new(StatusCode::CONFLICT, "CONFLICT", e.to_string()).with_details(json!({
                    "expected_revision": expected,
                    "current_revision": current,
                }))
            }
            BoardError::SessionNotFound(_) => ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()),
            BoardError::SessionExists(_) => ApiError::new(StatusCode::CONFLICT, e.code(), e.to_string()),
            BoardError::Persist(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string()),
            BoardError::NegativeCapacity { value, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
                    .with_details(json!({ "resulting_capacity": value }))
            }
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()),
        }
    }
}

impl From<ScoreError> for ApiError {
    fn from(e: ScoreError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl From<MatrixError> for ApiError {
    fn from(e: MatrixError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_MATRIX", e.to_string())
    }
}

impl From<ScheduleError> for ApiError {
    fn from(e: ScheduleError) -> Self {
        let details = match &e {
            ScheduleError::Infeasible(report) => serde_json::to_value(report).unwrap_or(Value::Null),
            _ => Value::Null,
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()).with_details(details)
    }
}

impl From<IoError> for ApiError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Validation(report) => ApiError::validation(&report),
            IoError::Io { .. } | IoError::Snapshot(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string())
            }
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()),
        }
    }
}
