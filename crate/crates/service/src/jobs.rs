use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde_json::json;
use tokio::sync::oneshot;

use crate::error::ApiError;

/// A finished response body, kept so a poll can return it verbatim.
#[derive(Debug, Clone)]
pub struct Reply {
    pub status: StatusCode,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json<T: serde::Serialize>(status: StatusCode, value: &T) -> Result<Self, ApiError> {
        let body = serde_json::to_vec(value).map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(Reply {
            status,
            content_type: "application/json",
            body,
        })
    }
}

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        (self.status, [(header::CONTENT_TYPE, self.content_type)], self.body).into_response()
    }
}

type Outcome = Result<Reply, ApiError>;
type Slot = Arc<Mutex<Option<Outcome>>>;

/// Background work that outlived its latency budget, keyed by poll token.
#[derive(Clone, Default)]
pub struct Jobs {
    pending: Arc<Mutex<HashMap<String, Slot>>>,
}

impl Jobs {
    /// Runs `work` on the blocking pool. Answers with its result if it
    /// finishes within `budget`, otherwise with 202 and a poll token.
    pub async fn run<F>(&self, budget: Duration, work: F) -> Response
    where
        F: FnOnce() -> Outcome + Send + 'static,
    {
        let slot: Slot = Arc::default();
        let (tx, rx) = oneshot::channel();
        let writer = slot.clone();
        tokio::task::spawn_blocking(move || {
            let outcome = work();
            *writer.lock().unwrap_or_else(|e| e.into_inner()) = Some(outcome.clone());
            let _ = tx.send(outcome);
        });
        match tokio::time::timeout(budget, rx).await {
            Ok(Ok(outcome)) => respond(outcome),
            Ok(Err(_)) => ApiError::internal("worker stopped without a result").into_response(),
            Err(_) => {
                let token = uuid::Uuid::new_v4().to_string();
                self.pending
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .insert(token.clone(), slot);
                pending(&token)
            }
        }
    }

    /// The stored result once ready (then forgotten), 202 while running.
    pub fn poll(&self, token: &str) -> Response {
        let mut pending_jobs = self.pending.lock().unwrap_or_else(|e| e.into_inner());
        let Some(slot) = pending_jobs.get(token).cloned() else {
            return ApiError::new(StatusCode::NOT_FOUND, "JOB_NOT_FOUND", format!("no job {token}")).into_response();
        };
        let done = slot.lock().unwrap_or_else(|e| e.into_inner()).clone();
        match done {
            Some(outcome) => {
                pending_jobs.remove(token);
                respond(outcome)
            }
            None => pending(token),
        }
    }
}

fn respond(outcome: Outcome) -> Response {
    match outcome {
        Ok(reply) => reply.into_response(),
        Err(e) => e.into_response(),
    }
}

fn pending(token: &str) -> Response {
    (
        StatusCode::ACCEPTED,
        axum::Json(json!({ "status": "pending", "token": token, "poll": format!("/jobs/{token}") })),
    )
        .into_response()
}
