use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_atomic, IoError};
use crate::board::BoardState;

pub const SNAPSHOT_FORMAT: &str = "matchboard.snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize)]
struct SnapshotOut<'a> {
    format: &'static str,
    version: u32,
    state: &'a BoardState,
}

#[derive(Deserialize)]
struct SnapshotIn {
    format: String,
    version: u32,
    state: BoardState,
}

/// Versioned UTF-8 JSON of the whole board, event log included.
pub fn snapshot_session(state: &BoardState) -> Vec<u8> {
    serde_json::to_vec(&SnapshotOut {
        format: SNAPSHOT_FORMAT,
        version: SNAPSHOT_VERSION,
        state,
    })
    .expect("board state serializes")
}

pub fn restore_session(bytes: &[u8]) -> Result<BoardState, IoError> {
    let snap: SnapshotIn = serde_json::from_slice(bytes).map_err(|e| IoError::Snapshot(e.to_string()))?;
    if snap.format != SNAPSHOT_FORMAT {
        return Err(IoError::Snapshot(format!("unexpected format {:?}", snap.format)));
    }
    if snap.version != SNAPSHOT_VERSION {
        return Err(IoError::Snapshot(format!(
            "version {} is not supported (expected {SNAPSHOT_VERSION})",
            snap.version
        )));
    }
    let state = snap.state;
    let sequential = state.event_log.iter().enumerate().all(|(k, e)| e.revision == k as u64);
    if !sequential || state.event_log.len() as u64 != state.revision + 1 {
        return Err(IoError::Snapshot(format!(
            "event log of {} entries does not end at revision {}",
            state.event_log.len(),
            state.revision
        )));
    }
    if !state.request.matrix.matches(&state.request.instance) {
        return Err(IoError::Snapshot("score matrix does not match the instance".into()));
    }
    Ok(state)
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// `<dir>/<session_id>.json`; ids outside `[A-Za-z0-9_-]` are refused.
pub fn snapshot_path(dir: &Path, session_id: &str) -> Result<PathBuf, IoError> {
    if !valid_session_id(session_id) {
        return Err(IoError::Snapshot(format!("invalid session id {session_id:?}")));
    }
    Ok(dir.join(format!("{session_id}.json")))
}

pub fn save_snapshot(dir: &Path, state: &BoardState) -> Result<PathBuf, IoError> {
    let path = snapshot_path(dir, &state.session_id)?;
    write_atomic(&path, &snapshot_session(state))?;
    Ok(path)
}

/// Every snapshot in `dir`, sorted by session id. Unreadable files are
/// reported rather than skipped.
pub fn load_snapshots(dir: &Path) -> Result<Vec<BoardState>, IoError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| IoError::io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| IoError::io(p, e))?;
            restore_session(&bytes).map_err(|e| IoError::Snapshot(format!("{}: {e}", p.display())))
        })
        .collect()
}
