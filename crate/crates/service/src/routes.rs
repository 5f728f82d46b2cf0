use std::collections::BTreeMap;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use matchboard_core::board::{self, BoardError, BoardState, Dimension};
use matchboard_core::io::{export_assignment, ExportFormat};
use matchboard_core::model::{validate_instance, Instance, ScoreMatrix, ScoreMode};
use matchboard_core::optimizer::{subscription_report, Capacity, SolveRequest, UNASSIGNED};
use matchboard_core::schedule::{self, Meeting, ScheduleConfig};
use matchboard_core::score::{
    build_score_matrix, train_employment_model, HistoryRecord, ScoreSource, ScoreWeights, TrainConfig, TrainedModel,
};
use matchboard_core::Location;

use crate::error::ApiError;
use crate::jobs::Reply;
use crate::{AppState, ACTOR_HEADER, REVISION_HEADER};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/move", post(move_case))
        .route("/sessions/{id}/lock", post(lock_case))
        .route("/sessions/{id}/capacity", post(adjust_capacity))
        .route("/sessions/{id}/reoptimize", post(reoptimize))
        .route("/sessions/{id}/whatif", get(whatif))
        .route("/sessions/{id}/crossrefs/{case}", get(crossrefs))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/subscriptions", get(subscriptions))
        .route("/jobs/{token}", get(poll_job))
        .route("/train", post(train))
        .route("/schedule", post(schedule_meetings))
        .with_state(state)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn actor(headers: &HeaderMap) -> String {
    headers
        .get(ACTOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty())
        .unwrap_or("api")
        .to_string()
}

fn expected_revision(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers.get(REVISION_HEADER).ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "REVISION_REQUIRED",
            "mutations need the X-Expected-Revision header",
        )
    })?;
    raw.to_str()
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| ApiError::bad_request("X-Expected-Revision must be a non-negative integer"))
}

fn target(raw: Option<String>) -> Option<String> {
    raw.filter(|t| !t.is_empty() && t != UNASSIGNED)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct CreateSession {
    instance: Instance,
    /// Used as-is when present.
    #[serde(default)]
    matrix: Option<ScoreMatrix>,
    /// Outcome-mode model document, used when no matrix is given.
    #[serde(default)]
    model: Option<serde_json::Value>,
    /// Preference weight, used in preference mode when no matrix is given.
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    locks: BTreeMap<String, String>,
    #[serde(default)]
    capacity_overrides: BTreeMap<String, Capacity>,
    #[serde(default)]
    cross_ref_bonus: f64,
    #[serde(default = "yes")]
    allow_unassigned: bool,
    #[serde(default)]
    session_id: Option<String>,
}

fn yes() -> bool {
    true
}

fn session_request(create: CreateSession) -> Result<(SolveRequest, Option<String>), ApiError> {
    let report = validate_instance(&create.instance);
    if !report.is_valid() {
        return Err(ApiError::validation(&report));
    }
    let instance = create.instance;
    let matrix = match (create.matrix, create.model, instance.mode) {
        (Some(m), _, _) => {
            m.check()?;
            if !m.matches(&instance) {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "MATRIX_MISMATCH",
                    "matrix rows and columns do not match the instance",
                ));
            }
            m
        }
        (None, Some(doc), ScoreMode::OutcomePredicted) => {
            let model = TrainedModel::from_json(&doc.to_string())?;
            build_score_matrix(&instance, ScoreSource::Model(&model))?
        }
        (None, _, ScoreMode::PreferenceAttribute) => {
            let weights = match create.alpha {
                Some(a) => ScoreWeights::new(a)?,
                None => ScoreWeights::default(),
            };
            build_score_matrix(&instance, ScoreSource::Weights(weights))?
        }
        (None, None, ScoreMode::OutcomePredicted) => {
            return Err(ApiError::bad_request("outcome mode needs a matrix or a model"));
        }
    };
    if let Some(id) = &create.session_id {
        matchboard_core::io::snapshot_path(std::path::Path::new("."), id)
            .map_err(|_| ApiError::bad_request(format!("session id {id:?} must match [A-Za-z0-9_-]{{1,128}}")))?;
    }
    let mut request = SolveRequest::new(instance, matrix);
    request.locks = create.locks;
    request.capacity_overrides = create.capacity_overrides;
    request.cross_ref_bonus = create.cross_ref_bonus;
    request.allow_unassigned = create.allow_unassigned;
    Ok((request, create.session_id))
}

async fn create_session(
    State(app): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ApiError> {
    let (request, session_id) = session_request(body(payload)?)?;
    if let Some(id) = &session_id {
        if app.store.get(id).is_ok() {
            return Err(BoardError::SessionExists(id.clone()).into());
        }
    }
    let who = actor(&headers);
    let store = app.store.clone();
    Ok(app
        .jobs
        .run(app.options.latency_budget, move || {
            let state = board::open_session(request, session_id, &who)?;
            let stored = store.insert(state)?;
            Reply::json(StatusCode::CREATED, &*stored)
        })
        .await)
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<String>> {
    Json(app.store.ids())
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let state = app.store.get(&id)?;
    Ok(Reply::json(StatusCode::OK, &*state)?.into_response())
}

async fn mutate<F>(app: AppState, id: String, headers: HeaderMap, op: F) -> Result<Response, ApiError>
where
    F: FnOnce(&BoardState, &str) -> Result<BoardState, BoardError> + Send + 'static,
{
    let expected = expected_revision(&headers)?;
    let who = actor(&headers);
    app.store.get(&id)?;
    let store = app.store.clone();
    Ok(app
        .jobs
        .run(app.options.latency_budget, move || {
            let state = store.mutate(&id, Some(expected), |s| op(s, &who))?;
            Reply::json(StatusCode::OK, &*state)
        })
        .await)
}

#[derive(Deserialize)]
struct MoveBody {
    case_id: String,
    /// A location id; absent, null, or "UNASSIGNED" unassigns.
    #[serde(default)]
    target: Option<String>,
}

async fn move_case(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<MoveBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let m = body(payload)?;
    let to = target(m.target);
    mutate(app, id, headers, move |s, who| {
        board::apply_move(s, &m.case_id, to.as_deref(), who)
    })
    .await
}

#[derive(Deserialize)]
struct LockBody {
    case_id: String,
}

async fn lock_case(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<LockBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let l = body(payload)?;
    mutate(app, id, headers, move |s, who| board::toggle_lock(s, &l.case_id, who)).await
}

#[derive(Deserialize)]
struct CapacityBody {
    location_id: String,
    dimension: Dimension,
    delta: i64,
}

async fn adjust_capacity(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<CapacityBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let c = body(payload)?;
    mutate(app, id, headers, move |s, who| {
        board::adjust_capacity(s, &c.location_id, c.dimension, c.delta, who)
    })
    .await
}

async fn reoptimize(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    mutate(app, id, headers, board::reoptimize).await
}

#[derive(Deserialize)]
struct WhatIfQuery {
    case: String,
    #[serde(default)]
    target: Option<String>,
}

async fn whatif(
    State(app): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<WhatIfQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let state = app.store.get(&id)?;
    let w = board::whatif_score(&state, &q.case, target(q.target).as_deref())?;
    Ok(Reply::json(StatusCode::OK, &w)?.into_response())
}

async fn crossrefs(
    State(app): State<AppState>,
    Path((id, case)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let state = app.store.get(&id)?;
    let view = board::cross_reference_view(&state, &case)?;
    Ok(Reply::json(StatusCode::OK, &view)?.into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn export(
    State(app): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<ExportQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let format: ExportFormat = q
        .format
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(ApiError::bad_request)?;
    let state = app.store.get(&id)?;
    let content_type = match format {
        ExportFormat::Csv => "text/csv; charset=utf-8",
        ExportFormat::Json => "application/json",
    };
    Ok(Reply {
        status: StatusCode::OK,
        content_type,
        body: export_assignment(&state, format),
    }
    .into_response())
}

async fn events(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let state = app.store.get(&id)?;
    Ok(Reply::json(StatusCode::OK, &state.event_log)?.into_response())
}

async fn subscriptions(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let state = app.store.get(&id)?;
    let report = subscription_report(&state.placement, &state.request);
    Ok(Reply::json(StatusCode::OK, &report)?.into_response())
}

async fn poll_job(State(app): State<AppState>, Path(token): Path<String>) -> Response {
    app.jobs.poll(&token)
}

#[derive(Deserialize)]
struct TrainBody {
    history: Vec<HistoryRecord>,
    locations: Vec<Location>,
    #[serde(default)]
    config: Option<TrainConfig>,
}

async fn train(
    State(app): State<AppState>,
    payload: Result<Json<TrainBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let t = body(payload)?;
    Ok(app
        .jobs
        .run(app.options.latency_budget, move || {
            let model = train_employment_model(&t.history, &t.locations, &t.config.unwrap_or_default())?;
            Ok(Reply {
                status: StatusCode::OK,
                content_type: "application/json",
                body: model.to_json().into_bytes(),
            })
        })
        .await)
}

#[derive(Deserialize)]
struct ScheduleBody {
    meetings: Vec<Meeting>,
    #[serde(default)]
    config: Option<ScheduleConfig>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ScheduleReply {
    schedule: schedule::Schedule,
    duplicates_removed: usize,
    scheduled: usize,
}

async fn schedule_meetings(
    State(app): State<AppState>,
    payload: Result<Json<ScheduleBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let s = body(payload)?;
    Ok(app
        .jobs
        .run(app.options.latency_budget, move || {
            let config = s.config.unwrap_or_default();
            let (unique, duplicates_removed) = schedule::prepare(&s.meetings);
            let out = schedule::build_schedule(&unique, &config, s.seed.unwrap_or(schedule::DEFAULT_SEED))?;
            Reply::json(
                StatusCode::OK,
                &ScheduleReply {
                    scheduled: unique.len(),
                    schedule: out,
                    duplicates_removed,
                },
            )
        })
        .await)
}
