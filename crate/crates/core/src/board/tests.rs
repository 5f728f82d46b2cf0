use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{Case, CrossRef, Instance, Location, ScoreMatrix, ScoreMode};
use crate::synth::{small_request, SmallRequestShape};

fn request(scores: &[&[f64]], compat: &[&[bool]], caps: &[(u32, u32)]) -> SolveRequest {
    let cases: Vec<Case> = (0..scores.len()).map(|i| Case::new(format!("c{i}"))).collect();
    let locations: Vec<Location> = caps
        .iter()
        .enumerate()
        .map(|(j, &(c, r))| Location::new(format!("l{j}"), c, r))
        .collect();
    let inst = Instance::new(cases, locations, 0, ScoreMode::OutcomePredicted);
    let matrix = ScoreMatrix::new(
        inst.cases.iter().map(|c| c.id.clone()).collect(),
        inst.locations.iter().map(|l| l.id.clone()).collect(),
        scores.iter().flat_map(|r| r.iter().copied()).collect(),
        compat.iter().flat_map(|r| r.iter().copied()).collect(),
    )
    .unwrap();
    SolveRequest::new(inst, matrix)
}

fn random_board(seed: u64) -> BoardState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = SmallRequestShape {
        cross_refs: true,
        lock_rate: 0.0,
        ..SmallRequestShape::default()
    };
    let req = small_request(&mut rng, &shape);
    open_session(req, Some(format!("s{seed}")), "test").unwrap()
}

fn random_target<R: Rng>(rng: &mut R, state: &BoardState) -> Option<String> {
    let locs = &state.request.instance.locations;
    let k = rng.gen_range(0..=locs.len());
    locs.get(k).map(|l| l.id.clone())
}

fn oracle_violations(state: &BoardState) -> BTreeSet<String> {
    let req = &state.request;
    let mut out = BTreeSet::new();
    for (j, loc) in req.instance.locations.iter().enumerate() {
        let here: Vec<usize> = (0..req.instance.cases.len())
            .filter(|&i| state.placement[&req.instance.cases[i].id].as_deref() == Some(loc.id.as_str()))
            .collect();
        let members: u64 = here.iter().map(|&i| req.instance.cases[i].member_count as u64).sum();
        let cap = req.effective_capacity(j);
        if here.len() as u64 > cap.cases as u64 {
            out.insert(format!("cap {} cases", loc.id));
        }
        if members > cap.members as u64 {
            out.insert(format!("cap {} members", loc.id));
        }
        for i in here {
            if !req.matrix.is_compatible(i, j) {
                out.insert(format!("incompat {} {}", req.instance.cases[i].id, loc.id));
            }
        }
    }
    out
}

fn as_set(violations: &[Violation]) -> BTreeSet<String> {
    violations
        .iter()
        .map(|v| match v {
            Violation::OverCapacity { location_id, dimension } => format!(
                "cap {location_id} {}",
                match dimension {
                    Dimension::Cases => "cases",
                    Dimension::Members => "members",
                }
            ),
            Violation::Incompatible { case_id, location_id } => format!("incompat {case_id} {location_id}"),
        })
        .collect()
}

fn assert_consistent(state: &BoardState) {
    let recomputed = state.recompute_total();
    assert!(
        (state.total_score - recomputed).abs() <= 1e-9,
        "total {} vs recomputed {}",
        state.total_score,
        recomputed
    );
    assert_eq!(as_set(&state.violations), oracle_violations(state));
    assert_eq!(state.event_log.len() as u64, state.revision + 1);
}

#[test]
fn empty_instance_opens_an_empty_board() {
    let req = SolveRequest::new(
        Instance::empty(ScoreMode::OutcomePredicted),
        ScoreMatrix::new(vec![], vec![], vec![], vec![]).unwrap(),
    );
    let b = open_session(req, None, "t").unwrap();
    assert_eq!(b.total_score, 0.0);
    assert!(b.placement.is_empty());
    assert_eq!(b.revision, 0);
}

#[test]
fn opening_total_matches_the_solver_and_is_deterministic() {
    for seed in 0..30 {
        let a = random_board(seed);
        let solved = optimizer::solve(&a.request).unwrap();
        assert_eq!(a.total_score, solved.objective);
        assert_eq!(a.placement, solved.placement);
        let b = random_board(seed);
        assert_eq!(a.placement, b.placement);
        assert_eq!(a.total_score.to_bits(), b.total_score.to_bits());
        assert_eq!(a.violations, b.violations);
    }
}

#[test]
fn move_adjusts_total_by_the_score_difference() {
    let req = request(&[&[0.8, 0.3]], &[&[true, true]], &[(1, 5), (1, 5)]);
    let b = open_session(req, None, "t").unwrap();
    assert_eq!(b.placement["c0"].as_deref(), Some("l0"));
    let moved = apply_move(&b, "c0", Some("l1"), "t").unwrap();
    assert!((b.total_score - moved.total_score - 0.5).abs() < 1e-12);
    assert_eq!(moved.revision, 1);
}

#[test]
fn move_to_the_same_location_only_bumps_the_revision() {
    let b = random_board(3);
    let (case, loc) = b.placement.iter().next().map(|(c, l)| (c.clone(), l.clone())).unwrap();
    let same = apply_move(&b, &case, loc.as_deref(), "t").unwrap();
    assert_eq!(same.revision, b.revision + 1);
    assert_eq!(same.placement, b.placement);
    assert_eq!(same.total_score.to_bits(), b.total_score.to_bits());
    assert_eq!(same.violations, b.violations);
    assert_eq!(same.request, b.request);
}

#[test]
fn random_move_sequences_keep_total_and_violations_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..100 {
        let mut b = random_board(seed);
        assert_consistent(&b);
        for _ in 0..15 {
            let cases = &b.request.instance.cases;
            let case = cases[rng.gen_range(0..cases.len())].id.clone();
            let target = random_target(&mut rng, &b);
            b = apply_move(&b, &case, target.as_deref(), "t").unwrap();
            assert_consistent(&b);
        }
    }
}

#[test]
fn whatif_agrees_with_apply_for_every_pair() {
    for seed in 0..60 {
        let mut b = random_board(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..3 {
            let cases = &b.request.instance.cases;
            let case = cases[rng.gen_range(0..cases.len())].id.clone();
            let target = random_target(&mut rng, &b);
            b = apply_move(&b, &case, target.as_deref(), "t").unwrap();
        }
        let case_ids: Vec<String> = b.request.instance.cases.iter().map(|c| c.id.clone()).collect();
        let mut targets: Vec<Option<String>> = b
            .request
            .instance
            .locations
            .iter()
            .map(|l| Some(l.id.clone()))
            .collect();
        targets.push(None);
        for case in &case_ids {
            for target in &targets {
                let w = whatif_score(&b, case, target.as_deref()).unwrap();
                let applied = apply_move(&b, case, target.as_deref(), "t").unwrap();
                assert!((w.projected_total - applied.total_score).abs() <= 1e-9);
                let new_capacity_flag = applied.violations.iter().any(|v| {
                    matches!(v, Violation::OverCapacity { location_id, .. } if Some(location_id) == target.as_ref())
                });
                assert_eq!(w.would_violate_capacity, new_capacity_flag);
            }
        }
    }
}

#[test]
fn whatif_at_current_location_is_identity() {
    let b = random_board(11);
    for (case, loc) in &b.placement {
        let w = whatif_score(&b, case, loc.as_deref()).unwrap();
        assert_eq!(w.projected_total, b.total_score);
    }
}

#[test]
fn whatif_reports_incompatibility_reasons() {
    let mut req = request(&[&[0.8, 0.3]], &[&[true, false]], &[(1, 5), (1, 5)]);
    req.instance.cases[0].attributes.languages.insert("fr".into());
    req.instance.locations[1].supported_languages.insert("en".into());
    let matrix =
        ScoreMatrix::from_fn::<crate::model::MatrixError>(&req.instance, |i, j, _| Ok([0.8, 0.3][j] + i as f64))
            .unwrap();
    req.matrix = matrix;
    let b = open_session(req, None, "t").unwrap();
    let w = whatif_score(&b, "c0", Some("l1")).unwrap();
    assert!(!w.compatible);
    assert!(!w.reasons.is_empty());
}

#[test]
fn lock_then_unlock_restores_the_lock_set() {
    let b = random_board(5);
    let placed = b
        .placement
        .iter()
        .find(|(_, l)| l.is_some())
        .map(|(c, _)| c.clone())
        .unwrap();
    let locked = toggle_lock(&b, &placed, "t").unwrap();
    assert_eq!(locked.locks()[&placed], b.placement[&placed].clone().unwrap());
    assert_eq!(
        apply_move(&locked, &placed, None, "t").unwrap_err().code(),
        "MOVE_LOCKED"
    );
    let unlocked = toggle_lock(&locked, &placed, "t").unwrap();
    assert_eq!(unlocked.locks(), b.locks());
    assert_eq!(unlocked.revision, b.revision + 2);
}

#[test]
fn locking_unassigned_is_rejected() {
    let req = request(&[&[0.8], &[0.5]], &[&[true], &[true]], &[(1, 5)]);
    let b = open_session(req, None, "t").unwrap();
    assert_eq!(b.placement["c1"], None);
    assert_eq!(toggle_lock(&b, "c1", "t").unwrap_err().code(), "LOCK_UNASSIGNED");
}

#[test]
fn mismatched_lock_survives_reoptimize() {
    let req = request(&[&[0.8, 0.3]], &[&[true, false]], &[(1, 5), (1, 5)]);
    let b = open_session(req, None, "t").unwrap();
    let moved = apply_move(&b, "c0", Some("l1"), "t").unwrap();
    assert_eq!(
        as_set(&moved.violations),
        BTreeSet::from(["incompat c0 l1".to_string()])
    );
    let locked = toggle_lock(&moved, "c0", "t").unwrap();
    let re = reoptimize(&locked, "t").unwrap();
    assert_eq!(re.placement["c0"].as_deref(), Some("l1"));
    assert_eq!(as_set(&re.violations), BTreeSet::from(["incompat c0 l1".to_string()]));
}

#[test]
fn capacity_edits_are_invertible_and_flag_overflow() {
    let req = request(&[&[0.8], &[0.5]], &[&[true], &[true]], &[(2, 5)]);
    let b = open_session(req, None, "t").unwrap();
    assert!(b.violations.is_empty());
    let up = adjust_capacity(&b, "l0", Dimension::Cases, 1, "t").unwrap();
    let back = adjust_capacity(&up, "l0", Dimension::Cases, -1, "t").unwrap();
    assert_eq!(back.request.effective_capacity(0), b.request.effective_capacity(0));
    let low = adjust_capacity(&b, "l0", Dimension::Cases, -1, "t").unwrap();
    assert_eq!(as_set(&low.violations), BTreeSet::from(["cap l0 cases".to_string()]));
    let err = adjust_capacity(&b, "l0", Dimension::Members, -6, "t").unwrap_err();
    assert_eq!(err.code(), "NEGATIVE_CAPACITY");
}

#[test]
fn random_edit_sequences_keep_violations_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..60 {
        let mut b = random_board(seed);
        for _ in 0..20 {
            let locs = &b.request.instance.locations;
            let cases = &b.request.instance.cases;
            b = match rng.gen_range(0..3) {
                0 => {
                    let loc = locs[rng.gen_range(0..locs.len())].id.clone();
                    let dim = if rng.gen_bool(0.5) {
                        Dimension::Cases
                    } else {
                        Dimension::Members
                    };
                    match adjust_capacity(&b, &loc, dim, rng.gen_range(-2..=2), "t") {
                        Ok(next) => next,
                        Err(e) => {
                            assert_eq!(e.code(), "NEGATIVE_CAPACITY");
                            continue;
                        }
                    }
                }
                1 => {
                    let case = cases[rng.gen_range(0..cases.len())].id.clone();
                    match toggle_lock(&b, &case, "t") {
                        Ok(next) => next,
                        Err(_) => continue,
                    }
                }
                _ => {
                    let case = cases[rng.gen_range(0..cases.len())].id.clone();
                    let target = random_target(&mut rng, &b);
                    match apply_move(&b, &case, target.as_deref(), "t") {
                        Ok(next) => next,
                        Err(e) => {
                            assert_eq!(e.code(), "MOVE_LOCKED");
                            continue;
                        }
                    }
                }
            };
            assert_consistent(&b);
        }
    }
}

#[test]
fn reoptimize_without_edits_keeps_the_placement() {
    for seed in 0..30 {
        let b = random_board(seed);
        let re = reoptimize(&b, "t").unwrap();
        assert_eq!(re.placement, b.placement);
        assert_eq!(re.total_score, b.total_score);
    }
}

#[test]
fn reoptimize_recovers_from_a_worsening_move() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..40 {
        let b = random_board(seed);
        let cases = &b.request.instance.cases;
        let case = cases[rng.gen_range(0..cases.len())].id.clone();
        let target = random_target(&mut rng, &b);
        let worse = apply_move(&b, &case, target.as_deref(), "t").unwrap();
        let re = reoptimize(&worse, "t").unwrap();
        assert_eq!(re.placement, b.placement);
        assert!((re.total_score - b.total_score).abs() <= 1e-9);
        let again = reoptimize(&re, "t").unwrap();
        assert_eq!(again.placement, re.placement);
        assert_eq!(again.total_score, re.total_score);
    }
}

#[test]
fn reoptimize_never_loses_to_a_feasible_board() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for seed in 0..60 {
        let mut b = random_board(seed);
        for _ in 0..4 {
            let cases = &b.request.instance.cases;
            let case = cases[rng.gen_range(0..cases.len())].id.clone();
            if b.is_locked(&case) {
                continue;
            }
            let target = random_target(&mut rng, &b);
            b = apply_move(&b, &case, target.as_deref(), "t").unwrap();
            if rng.gen_bool(0.3) && b.placement[&case].is_some() {
                b = toggle_lock(&b, &case, "t").unwrap();
            }
        }
        let only_locked_incompat = b.violations.iter().all(|v| match v {
            Violation::Incompatible { case_id, .. } => b.is_locked(case_id),
            Violation::OverCapacity { .. } => false,
        });
        match reoptimize(&b, "t") {
            Ok(re) => {
                if only_locked_incompat {
                    assert!(re.total_score >= b.total_score - 1e-9);
                }
                assert!(re
                    .violations
                    .iter()
                    .all(|v| matches!(v, Violation::Incompatible { case_id, .. } if re.is_locked(case_id))));
            }
            Err(e) => {
                assert_eq!(e.code(), "INFEASIBLE_LOCKS");
                assert!(!only_locked_incompat);
            }
        }
    }
}

#[test]
fn infeasible_locks_are_passed_through() {
    let req = request(&[&[0.8], &[0.5]], &[&[true], &[true]], &[(2, 5)]);
    let b = open_session(req, None, "t").unwrap();
    let b = toggle_lock(&b, "c0", "t").unwrap();
    let b = toggle_lock(&b, "c1", "t").unwrap();
    let b = adjust_capacity(&b, "l0", Dimension::Cases, -1, "t").unwrap();
    match reoptimize(&b, "t").unwrap_err() {
        BoardError::Solve(SolveError::InfeasibleLocks { locations }) => assert_eq!(locations, vec!["l0".to_string()]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn cross_reference_view_reports_co_placement() {
    let mut req = request(
        &[&[0.8, 0.1], &[0.7, 0.1], &[0.5, 0.6]],
        &[&[true, true], &[true, true], &[true, true]],
        &[(3, 10), (3, 10)],
    );
    req.instance.cases[0].cross_refs.insert(CrossRef::Case("c1".into()));
    req.instance.cases[1].cross_refs.insert(CrossRef::Case("c0".into()));
    req.instance.cases[0].cross_refs.insert(CrossRef::Location("l0".into()));
    req.instance.cases[1].cross_refs.insert(CrossRef::Case("c2".into()));
    let b = open_session(req, None, "t").unwrap();
    let v0 = cross_reference_view(&b, "c0").unwrap();
    assert_eq!(
        v0.linked_cases,
        vec![LinkStatus {
            id: "c1".into(),
            co_placed: true
        }]
    );
    assert_eq!(
        v0.linked_locations,
        vec![LinkStatus {
            id: "l0".into(),
            co_placed: true
        }]
    );
    let v1 = cross_reference_view(&b, "c1").unwrap();
    assert!(v1.linked_cases.iter().any(|l| l.id == "c0" && l.co_placed));
    assert!(v1.linked_cases.iter().any(|l| l.id == "c2" && !l.co_placed));
    let v2 = cross_reference_view(&b, "c2").unwrap();
    assert!(v2.linked_cases.is_empty() && v2.linked_locations.is_empty());
}

#[test]
fn replay_reproduces_the_board_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..40 {
        let mut b = random_board(seed);
        let mut history = vec![b.clone()];
        for step in 0..12 {
            let cases = &b.request.instance.cases;
            let case = cases[rng.gen_range(0..cases.len())].id.clone();
            let next = match step % 4 {
                0 | 1 => apply_move(&b, &case, random_target(&mut rng, &b).as_deref(), "a"),
                2 => toggle_lock(&b, &case, "b"),
                _ if step == 11 => reoptimize(&b, "c"),
                _ => {
                    let locs = &b.request.instance.locations;
                    let loc = locs[rng.gen_range(0..locs.len())].id.clone();
                    adjust_capacity(&b, &loc, Dimension::Members, rng.gen_range(-1..=2), "c")
                }
            };
            if let Ok(next) = next {
                b = next;
                history.push(b.clone());
            }
        }
        let replayed = replay(&b.session_id, &b.event_log, None).unwrap();
        assert_eq!(replayed, b);
        assert_eq!(replayed.total_score.to_bits(), b.total_score.to_bits());
        let json = serde_json::to_string(&b).unwrap();
        let back: BoardState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
        for earlier in &history {
            assert_eq!(&rewind(&b, earlier.revision).unwrap(), earlier);
        }
    }
}

#[test]
fn store_rejects_stale_revisions() {
    let store = SessionStore::new();
    let b = random_board(1);
    let id = b.session_id.clone();
    let case = b.request.instance.cases[0].id.clone();
    store.insert(b).unwrap();
    let first = store.mutate(&id, Some(0), |s| apply_move(s, &case, None, "a")).unwrap();
    assert_eq!(first.revision, 1);
    let err = store
        .mutate(&id, Some(0), |s| apply_move(s, &case, None, "b"))
        .unwrap_err();
    assert_eq!(
        err,
        BoardError::Conflict {
            expected: 0,
            current: 1
        }
    );
    assert_eq!(store.get(&id).unwrap().revision, 1);
    assert_eq!(store.get("nope").unwrap_err().code(), "SESSION_NOT_FOUND");
}

#[test]
fn concurrent_writers_are_serialized() {
    let store = Arc::new(SessionStore::new());
    let b = random_board(2);
    let id = b.session_id.clone();
    let case = b.request.instance.cases[0].id.clone();
    store.insert(b).unwrap();
    std::thread::scope(|scope| {
        for t in 0..8 {
            let store = store.clone();
            let (id, case) = (id.clone(), case.clone());
            scope.spawn(move || {
                for _ in 0..10 {
                    store
                        .mutate(&id, None, |s| apply_move(s, &case, None, &format!("w{t}")))
                        .unwrap();
                    let snap = store.get(&id).unwrap();
                    assert_eq!(snap.event_log.len() as u64, snap.revision + 1);
                }
            });
        }
    });
    let end = store.get(&id).unwrap();
    assert_eq!(end.revision, 80);
    let revisions: Vec<u64> = end.event_log.iter().map(|e| e.revision).collect();
    assert_eq!(revisions, (0..=80).collect::<Vec<_>>());
}

#[test]
fn failed_persistence_leaves_the_session_unchanged() {
    let store = SessionStore::with_persistence(|s| {
        if s.revision >= 1 {
            Err("disk full".into())
        } else {
            Ok(())
        }
    });
    let b = random_board(4);
    let id = b.session_id.clone();
    let case = b.request.instance.cases[0].id.clone();
    store.insert(b).unwrap();
    let err = store
        .mutate(&id, Some(0), |s| apply_move(s, &case, None, "a"))
        .unwrap_err();
    assert_eq!(err.code(), "PERSIST_ERROR");
    assert_eq!(store.get(&id).unwrap().revision, 0);
}
