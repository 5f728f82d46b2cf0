//! HTTP front end for placement boards, solving, scheduling, and training.
//!
//! Mutations carry the board revision they were computed against in the
//! `X-Expected-Revision` header; a stale revision gets `409` with the
//! current one. Work that outlives the latency budget answers `202` with a
//! token to poll at `/jobs/{token}`.

mod error;
mod jobs;
mod routes;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::Router;
use tokio::net::TcpListener;

use matchboard_core::board::SessionStore;
use matchboard_core::io::{load_snapshots, save_snapshot};

pub use error::ApiError;
pub use jobs::Jobs;

pub const REVISION_HEADER: &str = "x-expected-revision";
pub const ACTOR_HEADER: &str = "x-actor";
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Requests still running after this long answer 202 with a poll token.
    pub latency_budget: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            latency_budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("data directory {path}: {message}")]
    DataDir { path: PathBuf, message: String },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub jobs: Jobs,
    pub options: ServeOptions,
}

impl AppState {
    /// In-memory state with no persistence.
    pub fn ephemeral(options: ServeOptions) -> Self {
        AppState {
            store: Arc::new(SessionStore::new()),
            jobs: Jobs::default(),
            options,
        }
    }

    /// State whose sessions are snapshotted into `data_dir` on every
    /// commit, reloading whatever snapshots are already there.
    pub fn persistent(data_dir: &Path, options: ServeOptions) -> Result<Self, ServiceError> {
        let data_err = |message: String| ServiceError::DataDir {
            path: data_dir.to_path_buf(),
            message,
        };
        std::fs::create_dir_all(data_dir).map_err(|e| data_err(e.to_string()))?;
        let existing = load_snapshots(data_dir).map_err(|e| data_err(e.to_string()))?;
        let dir = data_dir.to_path_buf();
        let store = SessionStore::with_persistence(move |state| {
            save_snapshot(&dir, state).map(|_| ()).map_err(|e| e.to_string())
        });
        for state in existing {
            store.insert(state).map_err(|e| data_err(e.to_string()))?;
        }
        Ok(AppState {
            store: Arc::new(store),
            jobs: Jobs::default(),
            options,
        })
    }
}

pub fn router(state: AppState) -> Router {
    routes::router(state)
}

/// Binds `addr` and serves until ctrl-c; in-flight requests finish first.
pub async fn serve(addr: &str, data_dir: &Path, options: ServeOptions) -> Result<(), ServiceError> {
    let state = AppState::persistent(data_dir, options)?;
    let listener = TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    serve_on(listener, state, shutdown_signal()).await
}

pub async fn serve_on(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServiceError::Serve)
}

/// Serves `state` on an ephemeral local port in the background.
pub async fn spawn_local(state: AppState) -> Result<SocketAddr, ServiceError> {
    let listener = TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|source| ServiceError::Bind {
            addr: "127.0.0.1:0".into(),
            source,
        })?;
    let addr = listener.local_addr().map_err(ServiceError::Serve)?;
    tokio::spawn(async move {
        let _ = serve_on(listener, state, std::future::pending()).await;
    });
    Ok(addr)
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}
