//! The interactive placement board: manual moves, locks, capacity edits,
//! what-if queries, and re-optimization, all recorded in an append-only
//! event log that replays to the identical state.
//!
//! Every mutation is a pure function from one [`BoardState`] to the next.
//! Manual moves are never blocked by capacity or compatibility; the board
//! flags them as violations instead.

mod store;

use std::collections::BTreeMap;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{CrossRef, IncompatibilityReason};
use crate::optimizer::{self, Assignment, Capacity, Evaluator, SolveError, SolveRequest};

pub use store::SessionStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Cases,
    Members,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OverCapacity { location_id: String, dimension: Dimension },
    Incompatible { case_id: String, location_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum BoardAction {
    Open {
        request: SolveRequest,
    },
    Move {
        case_id: String,
        target: Option<String>,
    },
    Lock {
        case_id: String,
        location_id: String,
    },
    Unlock {
        case_id: String,
    },
    Capacity {
        location_id: String,
        dimension: Dimension,
        delta: i64,
    },
    Reoptimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardEvent {
    pub revision: u64,
    /// UTC, RFC 3339.
    pub timestamp: String,
    pub actor: String,
    #[serde(flatten)]
    pub action: BoardAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardState {
    pub session_id: String,
    /// The live request: locks, capacity overrides, and bonus as edited.
    pub request: SolveRequest,
    pub placement: BTreeMap<String, Option<String>>,
    pub total_score: f64,
    pub violations: Vec<Violation>,
    pub revision: u64,
    pub event_log: Vec<BoardEvent>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoardError {
    #[error("unknown case {0}")]
    UnknownCase(String),
    #[error("unknown location {0}")]
    UnknownLocation(String),
    #[error("case {0} is locked")]
    MoveLocked(String),
    #[error("case {0} is unassigned and cannot be locked")]
    LockUnassigned(String),
    #[error("{dimension:?} capacity of {location} would become {value}")]
    NegativeCapacity {
        location: String,
        dimension: Dimension,
        value: i64,
    },
    #[error("expected revision {expected}, session is at {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("session {0} already exists")]
    SessionExists(String),
    #[error("cannot replay event log: {0}")]
    Replay(String),
    #[error("could not persist session: {0}")]
    Persist(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl BoardError {
    pub fn code(&self) -> &'static str {
        match self {
            BoardError::UnknownCase(_) => "UNKNOWN_CASE",
            BoardError::UnknownLocation(_) => "UNKNOWN_LOCATION",
            BoardError::MoveLocked(_) => "MOVE_LOCKED",
            BoardError::LockUnassigned(_) => "LOCK_UNASSIGNED",
            BoardError::NegativeCapacity { .. } => "NEGATIVE_CAPACITY",
            BoardError::Conflict { .. } => "CONFLICT",
            BoardError::SessionNotFound(_) => "SESSION_NOT_FOUND",
            BoardError::SessionExists(_) => "SESSION_EXISTS",
            BoardError::Replay(_) => "REPLAY_ERROR",
            BoardError::Persist(_) => "PERSIST_ERROR",
            BoardError::Solve(e) => e.code(),
        }
    }
}

/// Result of a hypothetical move; never changes the board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub case_id: String,
    pub target: Option<String>,
    pub pair_score: f64,
    pub projected_total: f64,
    pub compatible: bool,
    pub reasons: Vec<IncompatibilityReason>,
    pub would_violate_capacity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStatus {
    pub id: String,
    pub co_placed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossRefView {
    pub case_id: String,
    pub linked_cases: Vec<LinkStatus>,
    pub linked_locations: Vec<LinkStatus>,
}

pub fn now_timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn placement_map(request: &SolveRequest, placement: &[Option<usize>]) -> BTreeMap<String, Option<String>> {
    let inst = &request.instance;
    placement
        .iter()
        .enumerate()
        .map(|(i, s)| (inst.cases[i].id.clone(), s.map(|j| inst.locations[j].id.clone())))
        .collect()
}

/// Exactly the set of capacity overflows and incompatible placements
/// (locked ones included) under `placement`.
pub fn compute_violations(request: &SolveRequest, placement: &[Option<usize>]) -> Vec<Violation> {
    let inst = &request.instance;
    let mut load = vec![(0u64, 0u64); inst.locations.len()];
    let mut incompatible = Vec::new();
    for (i, slot) in placement.iter().enumerate() {
        if let Some(j) = *slot {
            load[j].0 += 1;
            load[j].1 += inst.cases[i].member_count as u64;
            if !request.matrix.is_compatible(i, j) {
                incompatible.push(Violation::Incompatible {
                    case_id: inst.cases[i].id.clone(),
                    location_id: inst.locations[j].id.clone(),
                });
            }
        }
    }
    let mut out = Vec::new();
    for (j, loc) in inst.locations.iter().enumerate() {
        let cap = request.effective_capacity(j);
        if load[j].0 > cap.cases as u64 {
            out.push(Violation::OverCapacity {
                location_id: loc.id.clone(),
                dimension: Dimension::Cases,
            });
        }
        if load[j].1 > cap.members as u64 {
            out.push(Violation::OverCapacity {
                location_id: loc.id.clone(),
                dimension: Dimension::Members,
            });
        }
    }
    out.extend(incompatible);
    out
}

impl BoardState {
    /// Placement in index form (instance order).
    pub fn placement_indices(&self) -> Vec<Option<usize>> {
        optimizer::placement_indices(&self.request.instance, &self.placement).expect("board placement ids resolve")
    }

    pub fn locks(&self) -> &BTreeMap<String, String> {
        &self.request.locks
    }

    pub fn is_locked(&self, case_id: &str) -> bool {
        self.request.locks.contains_key(case_id)
    }

    /// Objective recomputed from scratch; the incrementally maintained
    /// `total_score` tracks it to within floating-point drift.
    pub fn recompute_total(&self) -> f64 {
        Evaluator::new(&self.request).objective(&self.placement_indices())
    }

    pub fn recompute_violations(&self) -> Vec<Violation> {
        compute_violations(&self.request, &self.placement_indices())
    }

    fn case_index(&self, case_id: &str) -> Result<usize, BoardError> {
        self.request
            .instance
            .cases
            .iter()
            .position(|c| c.id == case_id)
            .ok_or_else(|| BoardError::UnknownCase(case_id.to_string()))
    }

    fn location_index(&self, location_id: &str) -> Result<usize, BoardError> {
        self.request
            .instance
            .locations
            .iter()
            .position(|l| l.id == location_id)
            .ok_or_else(|| BoardError::UnknownLocation(location_id.to_string()))
    }

    fn target_index(&self, target: Option<&str>) -> Result<Option<usize>, BoardError> {
        target.map(|t| self.location_index(t)).transpose()
    }

    /// Change in total score if `case` moved to `target`.
    fn move_delta(&self, case: usize, target: Option<usize>, placement: &[Option<usize>]) -> f64 {
        let current = placement[case];
        if current == target {
            return 0.0;
        }
        let eval = Evaluator::new(&self.request);
        let pair = eval.pair_score(case, target) - eval.pair_score(case, current);
        let bonus = self.request.cross_ref_bonus;
        if bonus == 0.0 {
            return pair;
        }
        let before = eval.satisfied_touching(case, placement) as f64;
        let mut moved = placement.to_vec();
        moved[case] = target;
        let after = eval.satisfied_touching(case, &moved) as f64;
        pair + bonus * (after - before)
    }

    fn record(mut self, action: BoardAction, actor: &str, timestamp: String) -> Self {
        self.revision += 1;
        self.event_log.push(BoardEvent {
            revision: self.revision,
            timestamp,
            actor: actor.to_string(),
            action,
        });
        self
    }

    fn apply(&self, action: BoardAction, actor: &str, timestamp: String) -> Result<BoardState, BoardError> {
        match &action {
            BoardAction::Open { .. } => Err(BoardError::Replay("open is only valid as the first event".into())),
            BoardAction::Move { case_id, target } => {
                let i = self.case_index(case_id)?;
                let target_idx = self.target_index(target.as_deref())?;
                if self.is_locked(case_id) {
                    return Err(BoardError::MoveLocked(case_id.clone()));
                }
                let mut placement = self.placement_indices();
                let delta = self.move_delta(i, target_idx, &placement);
                placement[i] = target_idx;
                let mut next = self.clone();
                next.placement.insert(case_id.clone(), target.clone());
                next.total_score = self.total_score + delta;
                next.violations = compute_violations(&next.request, &placement);
                Ok(next.record(action, actor, timestamp))
            }
            BoardAction::Lock { case_id, location_id } => {
                self.case_index(case_id)?;
                self.location_index(location_id)?;
                let mut next = self.clone();
                next.request.locks.insert(case_id.clone(), location_id.clone());
                Ok(next.record(action, actor, timestamp))
            }
            BoardAction::Unlock { case_id } => {
                self.case_index(case_id)?;
                let mut next = self.clone();
                next.request.locks.remove(case_id);
                Ok(next.record(action, actor, timestamp))
            }
            BoardAction::Capacity {
                location_id,
                dimension,
                delta,
            } => {
                let j = self.location_index(location_id)?;
                let cap = self.request.effective_capacity(j);
                let current = match dimension {
                    Dimension::Cases => cap.cases,
                    Dimension::Members => cap.members,
                } as i64;
                let value = current + delta;
                if value < 0 {
                    return Err(BoardError::NegativeCapacity {
                        location: location_id.clone(),
                        dimension: *dimension,
                        value,
                    });
                }
                let value = u32::try_from(value).unwrap_or(u32::MAX);
                let updated = match dimension {
                    Dimension::Cases => Capacity { cases: value, ..cap },
                    Dimension::Members => Capacity { members: value, ..cap },
                };
                let mut next = self.clone();
                next.request.capacity_overrides.insert(location_id.clone(), updated);
                next.violations = next.recompute_violations();
                Ok(next.record(action, actor, timestamp))
            }
            BoardAction::Reoptimize => {
                let assignment = optimizer::solve(&self.request)?;
                let mut next = self.clone();
                next.placement = assignment.placement;
                next.total_score = assignment.objective;
                next.violations = next.recompute_violations();
                Ok(next.record(action, actor, timestamp))
            }
        }
    }
}

/// Opens a board on the optimal placement of `request`. Revision 0.
pub fn open_session(request: SolveRequest, session_id: Option<String>, actor: &str) -> Result<BoardState, BoardError> {
    open_at(
        request,
        session_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string()),
        actor,
        now_timestamp(),
    )
}

fn open_at(
    request: SolveRequest,
    session_id: String,
    actor: &str,
    timestamp: String,
) -> Result<BoardState, BoardError> {
    let assignment = optimizer::solve(&request)?;
    open_from(request, &assignment, session_id, actor, timestamp)
}

/// Opens a board on an assignment solved elsewhere, e.g. with cancellation.
/// Replaying its log re-solves, so an interrupted assignment will not
/// replay to the same placement.
pub fn open_with_assignment(
    request: SolveRequest,
    assignment: &Assignment,
    session_id: String,
    actor: &str,
) -> Result<BoardState, BoardError> {
    open_from(request, assignment, session_id, actor, now_timestamp())
}

fn open_from(
    request: SolveRequest,
    assignment: &Assignment,
    session_id: String,
    actor: &str,
    timestamp: String,
) -> Result<BoardState, BoardError> {
    let placement = optimizer::placement_indices(&request.instance, &assignment.placement)?;
    let violations = compute_violations(&request, &placement);
    let event = BoardEvent {
        revision: 0,
        timestamp,
        actor: actor.to_string(),
        action: BoardAction::Open {
            request: request.clone(),
        },
    };
    Ok(BoardState {
        session_id,
        placement: placement_map(&request, &placement),
        request,
        total_score: assignment.objective,
        violations,
        revision: 0,
        event_log: vec![event],
    })
}

/// Moves an unlocked case to a location or to unassigned.
pub fn apply_move(
    state: &BoardState,
    case_id: &str,
    target: Option<&str>,
    actor: &str,
) -> Result<BoardState, BoardError> {
    state.apply(
        BoardAction::Move {
            case_id: case_id.to_string(),
            target: target.map(str::to_string),
        },
        actor,
        now_timestamp(),
    )
}

/// Pins a placed case to its current location, or releases an existing pin.
pub fn toggle_lock(state: &BoardState, case_id: &str, actor: &str) -> Result<BoardState, BoardError> {
    state.case_index(case_id)?;
    let action = if state.is_locked(case_id) {
        BoardAction::Unlock {
            case_id: case_id.to_string(),
        }
    } else {
        match state.placement.get(case_id).cloned().flatten() {
            Some(location_id) => BoardAction::Lock {
                case_id: case_id.to_string(),
                location_id,
            },
            None => return Err(BoardError::LockUnassigned(case_id.to_string())),
        }
    };
    state.apply(action, actor, now_timestamp())
}

pub fn adjust_capacity(
    state: &BoardState,
    location_id: &str,
    dimension: Dimension,
    delta: i64,
    actor: &str,
) -> Result<BoardState, BoardError> {
    state.apply(
        BoardAction::Capacity {
            location_id: location_id.to_string(),
            dimension,
            delta,
        },
        actor,
        now_timestamp(),
    )
}

/// Re-solves with the board's locks, overrides, and bonus. Unlocked manual
/// moves are discarded.
pub fn reoptimize(state: &BoardState, actor: &str) -> Result<BoardState, BoardError> {
    state.apply(BoardAction::Reoptimize, actor, now_timestamp())
}

pub fn whatif_score(state: &BoardState, case_id: &str, target: Option<&str>) -> Result<WhatIf, BoardError> {
    let i = state.case_index(case_id)?;
    let target_idx = state.target_index(target)?;
    let placement = state.placement_indices();
    let delta = state.move_delta(i, target_idx, &placement);
    let (pair_score, compatible, reasons, would_violate_capacity) = match target_idx {
        None => (0.0, true, Vec::new(), false),
        Some(j) => {
            let m = &state.request.matrix;
            let inst = &state.request.instance;
            let cap = state.request.effective_capacity(j);
            let (mut cases, mut members) = (0u64, 0u64);
            for (k, slot) in placement.iter().enumerate() {
                if *slot == Some(j) && k != i {
                    cases += 1;
                    members += inst.cases[k].member_count as u64;
                }
            }
            cases += 1;
            members += inst.cases[i].member_count as u64;
            (
                m.score(i, j),
                m.is_compatible(i, j),
                m.reasons(i, j).to_vec(),
                cases > cap.cases as u64 || members > cap.members as u64,
            )
        }
    };
    Ok(WhatIf {
        case_id: case_id.to_string(),
        target: target.map(str::to_string),
        pair_score,
        projected_total: state.total_score + delta,
        compatible,
        reasons,
        would_violate_capacity,
    })
}

pub fn cross_reference_view(state: &BoardState, case_id: &str) -> Result<CrossRefView, BoardError> {
    let i = state.case_index(case_id)?;
    let case = &state.request.instance.cases[i];
    let here = state.placement.get(case_id).cloned().flatten();
    let mut linked_cases = Vec::new();
    let mut linked_locations = Vec::new();
    for link in &case.cross_refs {
        match link {
            CrossRef::Case(other) => {
                let there = state.placement.get(other).cloned().flatten();
                linked_cases.push(LinkStatus {
                    id: other.clone(),
                    co_placed: here.is_some() && here == there,
                });
            }
            CrossRef::Location(loc) => linked_locations.push(LinkStatus {
                id: loc.clone(),
                co_placed: here.as_deref() == Some(loc.as_str()),
            }),
        }
    }
    Ok(CrossRefView {
        case_id: case_id.to_string(),
        linked_cases,
        linked_locations,
    })
}

/// Rebuilds a board from its event log, up to and including `until`
/// (the whole log when `None`). Timestamps and actors are taken from the log.
pub fn replay(session_id: &str, events: &[BoardEvent], until: Option<u64>) -> Result<BoardState, BoardError> {
    let (first, rest) = events
        .split_first()
        .ok_or_else(|| BoardError::Replay("empty event log".into()))?;
    let BoardAction::Open { request } = &first.action else {
        return Err(BoardError::Replay("log does not start with open".into()));
    };
    let mut state = open_at(
        request.clone(),
        session_id.to_string(),
        &first.actor,
        first.timestamp.clone(),
    )?;
    for event in rest {
        if until.is_some_and(|r| event.revision > r) {
            break;
        }
        if event.revision != state.revision + 1 {
            return Err(BoardError::Replay(format!(
                "revision {} follows {}",
                event.revision, state.revision
            )));
        }
        state = state.apply(event.action.clone(), &event.actor, event.timestamp.clone())?;
    }
    Ok(state)
}

/// Undo by replay: the state as of `revision`, with the later events dropped.
pub fn rewind(state: &BoardState, revision: u64) -> Result<BoardState, BoardError> {
    if revision > state.revision {
        return Err(BoardError::Replay(format!("revision {revision} is in the future")));
    }
    replay(&state.session_id, &state.event_log, Some(revision))
}

#[cfg(test)]
mod tests;
