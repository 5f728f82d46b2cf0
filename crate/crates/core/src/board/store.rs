use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use super::{BoardError, BoardState};

type PersistFn = dyn Fn(&BoardState) -> Result<(), String> + Send + Sync;

struct Slot {
    writer: Mutex<()>,
    current: RwLock<Arc<BoardState>>,
}

/// Concurrent home for open boards. Mutations on one session are
/// serialized and checked against an expected revision; reads take an
/// immutable snapshot and never wait on a writer's computation.
#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    persist: Option<Box<PersistFn>>,
}

impl std::fmt::Debug for SessionStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionStore").field("sessions", &self.ids()).finish()
    }
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every committed state is passed to `persist` while the session's
    /// writer is held; a failure aborts the commit.
    pub fn with_persistence(persist: impl Fn(&BoardState) -> Result<(), String> + Send + Sync + 'static) -> Self {
        SessionStore {
            sessions: RwLock::default(),
            persist: Some(Box::new(persist)),
        }
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, BoardError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| BoardError::SessionNotFound(id.to_string()))
    }

    fn persist(&self, state: &BoardState) -> Result<(), BoardError> {
        match &self.persist {
            Some(f) => f(state).map_err(BoardError::Persist),
            None => Ok(()),
        }
    }

    pub fn insert(&self, state: BoardState) -> Result<Arc<BoardState>, BoardError> {
        let mut map = self.sessions.write().expect("session map poisoned");
        if map.contains_key(&state.session_id) {
            return Err(BoardError::SessionExists(state.session_id));
        }
        self.persist(&state)?;
        let state = Arc::new(state);
        map.insert(
            state.session_id.clone(),
            Arc::new(Slot {
                writer: Mutex::new(()),
                current: RwLock::new(state.clone()),
            }),
        );
        Ok(state)
    }

    pub fn get(&self, id: &str) -> Result<Arc<BoardState>, BoardError> {
        let slot = self.slot(id)?;
        let current = slot.current.read().expect("session poisoned").clone();
        Ok(current)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("session map poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    pub fn remove(&self, id: &str) -> Result<(), BoardError> {
        self.sessions
            .write()
            .expect("session map poisoned")
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| BoardError::SessionNotFound(id.to_string()))
    }

    /// Applies `f` to the session's current state. With `expected_revision`
    /// set, the mutation is rejected with `Conflict` unless the session is
    /// still at that revision.
    pub fn mutate<F>(&self, id: &str, expected_revision: Option<u64>, f: F) -> Result<Arc<BoardState>, BoardError>
    where
        F: FnOnce(&BoardState) -> Result<BoardState, BoardError>,
    {
        let slot = self.slot(id)?;
        let _writer = slot.writer.lock().unwrap_or_else(|e| e.into_inner());
        let current = slot.current.read().expect("session poisoned").clone();
        if let Some(expected) = expected_revision {
            if expected != current.revision {
                return Err(BoardError::Conflict {
                    expected,
                    current: current.revision,
                });
            }
        }
        let next = f(&current)?;
        self.persist(&next)?;
        let next = Arc::new(next);
        *slot.current.write().expect("session poisoned") = next.clone();
        Ok(next)
    }
}
