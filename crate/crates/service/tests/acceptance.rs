//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Runs without the board UI.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::StatusCode;
use serde_json::json;

use matchboard_core::board::{self, BoardError, BoardState, Dimension};
use matchboard_core::io::{export_assignment, snapshot_session, ExportFormat};
use matchboard_core::optimizer::{brute_force_oracle, solve, SolveError, SolveRequest};
use matchboard_core::schedule::{build_schedule, exhaustive_schedule, schedule_cost, ScheduleConfig};
use matchboard_core::score::{
    build_score_matrix, fit_logistic, LogisticObjective, ScoreSource, ScoreWeights, TrainConfig,
};
use matchboard_core::synth::{
    logistic_data, meetings_around, planted_allocation, random_feasible_partition, small_request, SmallRequestShape,
};
use matchboard_service::{spawn_local, AppState, ServeOptions};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let shape = SmallRequestShape {
        max_cases: 6,
        max_locations: 3,
        max_members: 4,
        lock_rate: 0.2,
        ..SmallRequestShape::default()
    };
    let mut mismatches = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut with_locks = 0;
    for seed in 0..200u64 {
        let req = small_request(&mut ChaCha8Rng::seed_from_u64(seed), &shape);
        with_locks += usize::from(!req.locks.is_empty());
        let started = Instant::now();
        let got = solve(&req);
        slowest = slowest.max(started.elapsed());
        let same = match (&got, &brute_force_oracle(&req)) {
            (Ok(a), Ok(b)) => a.objective == b.objective,
            (Err(a), Err(b)) => a == b,
            _ => false,
        };
        if !same {
            mismatches.push(seed);
        }
    }
    check(
        mismatches.is_empty() && slowest < Duration::from_secs(1),
        format!(
            "{}/200 exact ({with_locks} with locks), slowest solve {:.1} ms, mismatched seeds {mismatches:?}",
            200 - mismatches.len(),
            slowest.as_secs_f64() * 1e3
        ),
    )
}

fn full_placement() -> Outcome {
    let mut failures = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let (instance, _) = planted_allocation(&mut rng, 1000, 25, 5, 8);
        let matrix =
            build_score_matrix(&instance, ScoreSource::Weights(ScoreWeights::default())).map_err(|e| e.to_string())?;
        let req = SolveRequest::new(instance, matrix);
        let started = Instant::now();
        let a = solve(&req).map_err(|e| format!("seed {seed}: {e}"))?;
        let took = started.elapsed();
        slowest = slowest.max(took);
        let ranked = req
            .instance
            .cases
            .iter()
            .filter(|c| a.placement[&c.id].as_deref().is_some_and(|at| c.rank_of(at).is_some()))
            .count();
        if ranked != 1000 || took >= Duration::from_secs(30) {
            failures.push((seed, ranked));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "50 instances of 1000x25, all students at a ranked center in {}/50, slowest {:.2} s, failures {failures:?}",
            50 - failures.len(),
            slowest.as_secs_f64()
        ),
    )
}

fn lock_semantics() -> Outcome {
    let shape = SmallRequestShape {
        max_cases: 6,
        max_locations: 3,
        lock_rate: 0.0,
        compatible: 0.6,
        ..SmallRequestShape::default()
    };
    let mut retained = 0;
    let mut refused = 0;
    let mut errors = Vec::new();
    let mut seed = 0u64;
    while retained + refused < 100 && seed < 5000 {
        seed += 1;
        let req = small_request(&mut ChaCha8Rng::seed_from_u64(seed), &shape);
        let Ok(state) = board::open_session(req.clone(), Some("lock".into()), "test") else {
            continue;
        };
        let pair = (0..req.instance.cases.len())
            .flat_map(|i| (0..req.instance.locations.len()).map(move |j| (i, j)))
            .find(|&(i, j)| !req.matrix.is_compatible(i, j));
        let Some((i, j)) = pair else { continue };
        let (case, loc) = (req.instance.cases[i].id.clone(), req.instance.locations[j].id.clone());
        let moved = board::apply_move(&state, &case, Some(&loc), "test").map_err(|e| e.to_string())?;
        let locked = board::toggle_lock(&moved, &case, "test").map_err(|e| e.to_string())?;
        match (board::reoptimize(&locked, "test"), brute_force_oracle(&locked.request)) {
            (Ok(next), Ok(best)) => {
                if next.placement[&case].as_deref() == Some(loc.as_str()) && next.total_score == best.objective {
                    retained += 1;
                } else {
                    errors.push(seed);
                }
            }
            (Err(BoardError::Solve(a @ SolveError::InfeasibleLocks { .. })), Err(b)) if a == b => refused += 1,
            _ => errors.push(seed),
        }
    }

    let mut naming_errors = Vec::new();
    let mut lock_sets = 0;
    for seed in 0..300u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
        let mut req = small_request(&mut rng, &shape);
        let n_loc = req.instance.locations.len();
        for case in &req.instance.cases {
            if rng.gen_bool(0.7) {
                let j = rng.gen_range(0..n_loc);
                req.locks.insert(case.id.clone(), req.instance.locations[j].id.clone());
            }
        }
        let mut load: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
        for (c, l) in &req.locks {
            let members = req.instance.cases.iter().find(|x| &x.id == c).unwrap().member_count;
            let e = load.entry(l.as_str()).or_default();
            e.0 += 1;
            e.1 += members;
        }
        let violating: BTreeSet<String> = req
            .instance
            .locations
            .iter()
            .enumerate()
            .filter(|(j, l)| {
                let cap = req.effective_capacity(*j);
                load.get(l.id.as_str())
                    .is_some_and(|&(c, m)| c > cap.cases || m > cap.members)
            })
            .map(|(_, l)| l.id.clone())
            .collect();
        if violating.is_empty() {
            continue;
        }
        lock_sets += 1;
        match solve(&req) {
            Err(SolveError::InfeasibleLocks { locations })
                if locations.iter().cloned().collect::<BTreeSet<_>>() == violating => {}
            _ => naming_errors.push(50_000 + seed),
        }
    }
    check(
        errors.is_empty() && naming_errors.is_empty() && retained >= 50,
        format!(
            "incompatible locks: {retained} retained at the locked optimum, {refused} over-capacity refusals, errors {errors:?}; \
             {lock_sets} capacity-violating lock sets, naming errors {naming_errors:?}"
        ),
    )
}

fn whatif_parity() -> Outcome {
    let shape = SmallRequestShape {
        max_cases: 8,
        max_locations: 4,
        cross_refs: true,
        lock_rate: 0.2,
        ..SmallRequestShape::default()
    };
    let mut pairs = 0usize;
    let mut worst = 0.0f64;
    let mut replay_failures = Vec::new();
    let mut boards = 0;
    let mut seed = 0u64;
    while boards < 100 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + seed);
        let mut req = small_request(&mut rng, &shape);
        req.cross_ref_bonus = rng.gen_range(0.0..2.0);
        let Ok(mut state) = board::open_session(req.clone(), Some(format!("b{seed}")), "test") else {
            continue;
        };
        boards += 1;
        let targets: Vec<Option<String>> = std::iter::once(None)
            .chain(req.instance.locations.iter().map(|l| Some(l.id.clone())))
            .collect();
        for case in &req.instance.cases {
            if state.is_locked(&case.id) {
                continue;
            }
            for t in &targets {
                let w = board::whatif_score(&state, &case.id, t.as_deref()).map_err(|e| e.to_string())?;
                let after = board::apply_move(&state, &case.id, t.as_deref(), "test").map_err(|e| e.to_string())?;
                worst = worst.max((w.projected_total - after.total_score).abs());
                worst = worst.max((after.recompute_total() - after.total_score).abs());
                pairs += 1;
            }
        }
        for _ in 0..12 {
            let case = &req.instance.cases.choose(&mut rng).unwrap().id;
            let next = match rng.gen_range(0..4) {
                0 | 1 => board::apply_move(&state, case, targets.choose(&mut rng).unwrap().as_deref(), "test"),
                2 => board::toggle_lock(&state, case, "test"),
                _ => {
                    let loc = &req.instance.locations.choose(&mut rng).unwrap().id;
                    board::adjust_capacity(&state, loc, Dimension::Cases, rng.gen_range(-1..=1), "test")
                }
            };
            if let Ok(next) = next {
                state = next;
            }
        }
        if let Ok(next) = board::reoptimize(&state, "test") {
            state = next;
        }
        let replayed = board::replay(&state.session_id, &state.event_log, None).map_err(|e| e.to_string())?;
        if replayed != state || snapshot_session(&replayed) != snapshot_session(&state) {
            replay_failures.push(seed);
        }
    }
    check(
        worst <= 1e-9 && replay_failures.is_empty(),
        format!("{pairs} (case, target) pairs on {boards} boards, max |whatif - applied| {worst:.2e}, replay mismatches {replay_failures:?}"),
    )
}

fn scheduler() -> Outcome {
    let config = ScheduleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let meetings = meetings_around(&mut rng, 15, (-25.3, -57.6), 0.15, 60);
    let plan = build_schedule(&meetings, &config, 42).map_err(|e| e.to_string())?;
    let three_each = plan.feasible && plan.day_groups.len() == 5 && plan.day_groups.iter().all(|g| g.len() == 3);

    let mut costs: Vec<f64> = (0..1000)
        .filter_map(|_| random_feasible_partition(&mut rng, &meetings, &config))
        .map(|s| schedule_cost(&s.day_groups, &meetings).unwrap())
        .collect();
    costs.sort_by(f64::total_cmp);
    let median = if costs.len() % 2 == 1 {
        costs[costs.len() / 2]
    } else {
        (costs[costs.len() / 2 - 1] + costs[costs.len() / 2]) / 2.0
    };

    let small = ScheduleConfig {
        days: 2,
        ..ScheduleConfig::default()
    };
    let mut matched = 0;
    let mut trials = 0;
    let mut seed = 0u64;
    while trials < 100 {
        seed += 1;
        let mut trng = ChaCha8Rng::seed_from_u64(70_000 + seed);
        let n = trng.gen_range(3..=8);
        let minutes = trng.gen_range(30..=90);
        let ms = meetings_around(&mut trng, n, (40.4, -3.7), 0.3, minutes);
        let Some(best) = exhaustive_schedule(&ms, &small) else {
            continue;
        };
        trials += 1;
        let got = build_schedule(&ms, &small, seed).map_err(|e| e.to_string())?;
        if got.cost <= best.cost * (1.0 + 1e-9) + 1e-12 {
            matched += 1;
        }
    }
    check(
        three_each && costs.len() == 1000 && plan.cost <= median && matched >= 95,
        format!(
            "15 meetings: feasible {} with day sizes {:?}; cost {:.3} km vs median {:.3} km of {} random partitions; \
             {matched}/100 small trials at the exhaustive optimum",
            plan.feasible,
            plan.day_groups.iter().map(Vec::len).collect::<Vec<_>>(),
            plan.cost,
            median,
            costs.len()
        ),
    )
}

fn predictor() -> Outcome {
    let truth = [1.2, -0.8, 0.5, 0.0, -1.5, 0.3];
    let intercept = -0.4;
    let mut rng = ChaCha8Rng::seed_from_u64(2000);
    let (x, y) = logistic_data(&mut rng, 2000, &truth, intercept);
    let config = TrainConfig {
        l2_strength: 0.0,
        ..TrainConfig::default()
    };
    let fit = fit_logistic(&x, &y, &config).map_err(|e| e.to_string())?;
    let linf = fit
        .weights
        .iter()
        .chain(std::iter::once(&fit.intercept))
        .zip(truth.iter().chain(std::iter::once(&intercept)))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let objective = LogisticObjective::new(&x, &y, 1e-3).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst_rel = 0.0f64;
    for _ in 0..10 {
        let w: Vec<f64> = (0..truth.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let (gw, gb) = objective.gradient(&w, b);
        let mut analytic = gw.clone();
        analytic.push(gb);
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..=w.len() {
            let shifted = |d: f64| {
                let mut wk = w.clone();
                let mut bk = b;
                if k < w.len() {
                    wk[k] += d;
                } else {
                    bk += d;
                }
                objective.loss(&wk, bk)
            };
            numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
        }
        let diff = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = analytic
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt())
            .max(1e-12);
        worst_rel = worst_rel.max(diff / scale);
    }
    let monotone = fit.loss_trace.windows(2).all(|p| p[1] <= p[0]);
    check(
        linf <= 0.15 && worst_rel < 1e-4 && monotone,
        format!(
            "L-inf weight error {linf:.4} (n=2000, 6 features); worst gradient relative error {worst_rel:.2e} over 10 points; \
             loss trace of {} steps monotone {monotone}",
            fit.loss_trace.len()
        ),
    )
}

async fn api_parity_async() -> Outcome {
    let addr = spawn_local(AppState::ephemeral(ServeOptions::default()))
        .await
        .map_err(|e| e.to_string())?;
    let base = format!("http://{addr}");
    let client = reqwest::Client::new();
    let shape = SmallRequestShape {
        max_cases: 6,
        max_locations: 3,
        cross_refs: true,
        lock_rate: 0.0,
        ..SmallRequestShape::default()
    };
    let mut identical = 0;
    let mut flows = 0;
    let mut conflicts = 0;
    for seed in 0..20u64 {
        let req = small_request(&mut ChaCha8Rng::seed_from_u64(300 + seed), &shape);
        let id = format!("parity-{seed}");
        let body = json!({
            "instance": req.instance,
            "matrix": req.matrix,
            "locks": req.locks,
            "capacity_overrides": req.capacity_overrides,
            "cross_ref_bonus": req.cross_ref_bonus,
            "session_id": id,
        });
        let r = client
            .post(format!("{base}/sessions"))
            .json(&body)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if r.status() != StatusCode::CREATED {
            continue;
        }
        flows += 1;
        let mut local = board::open_session(req.clone(), Some(id.clone()), "api").map_err(|e| e.to_string())?;
        let case = req.instance.cases[0].id.clone();
        let loc = req.instance.locations[req.instance.locations.len() - 1].id.clone();
        let steps = [
            ("move", json!({"case_id": case, "target": loc})),
            ("lock", json!({"case_id": case})),
            (
                "capacity",
                json!({"location_id": loc, "dimension": "members", "delta": 2}),
            ),
            ("reoptimize", json!({})),
        ];
        for (rev, (name, payload)) in steps.iter().enumerate() {
            let r = client
                .post(format!("{base}/sessions/{id}/{name}"))
                .header("X-Expected-Revision", rev.to_string())
                .json(payload)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            let next = match *name {
                "move" => board::apply_move(&local, &case, Some(&loc), "api"),
                "lock" => board::toggle_lock(&local, &case, "api"),
                "capacity" => board::adjust_capacity(&local, &loc, Dimension::Members, 2, "api"),
                _ => board::reoptimize(&local, "api"),
            };
            match next {
                Ok(s) if r.status() == StatusCode::OK => local = s,
                Err(_) if r.status() == StatusCode::UNPROCESSABLE_ENTITY => break,
                other => {
                    return Err(format!(
                        "seed {seed} step {name}: wire {} vs engine {:?}",
                        r.status(),
                        other.err()
                    ))
                }
            }
        }
        let mut same = true;
        for (format, name) in [(ExportFormat::Csv, "csv"), (ExportFormat::Json, "json")] {
            let bytes = client
                .get(format!("{base}/sessions/{id}/export?format={name}"))
                .send()
                .await
                .map_err(|e| e.to_string())?
                .bytes()
                .await
                .map_err(|e| e.to_string())?;
            same &= bytes.as_ref() == export_assignment(&local, format).as_slice();
        }
        identical += usize::from(same);

        let stale = client
            .post(format!("{base}/sessions/{id}/move"))
            .header("X-Expected-Revision", "0")
            .json(&json!({"case_id": case}))
            .send()
            .await
            .map_err(|e| e.to_string())?;
        let current: BoardState = client
            .get(format!("{base}/sessions/{id}"))
            .send()
            .await
            .map_err(|e| e.to_string())?
            .json()
            .await
            .map_err(|e| e.to_string())?;
        if stale.status() == StatusCode::CONFLICT && current.revision == local.revision {
            conflicts += 1;
        }
    }
    check(
        flows > 0 && identical == flows && conflicts == flows,
        format!("{identical}/{flows} scripted flows byte-identical (csv and json); {conflicts}/{flows} stale mutations answered 409"),
    )
}

fn api_parity() -> Outcome {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime.block_on(api_parity_async())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("oracle-equivalence", oracle_equivalence),
        ("full-placement", full_placement),
        ("lock-semantics", lock_semantics),
        ("whatif-apply-parity", whatif_parity),
        ("scheduler", scheduler),
        ("predictor", predictor),
        ("api-parity", api_parity),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name:<20} {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name:<20} {detail} [{secs:.1} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
