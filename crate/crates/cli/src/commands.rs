use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use matchboard_core::board::{self, BoardState};
use matchboard_core::io::{
    export_assignment, load_history_file, load_instance, load_meetings_file, load_model, load_scores, parse_locations,
    parse_locks, read_text, restore_session, snapshot_session, write_atomic, write_matrix, ExportFormat, FileManifest,
};
use matchboard_core::optimizer::{solve_with, subscription_report, CancelToken, SolveOptions, SolveStatus};
use matchboard_core::schedule::{build_schedule, prepare, ScheduleConfig};
use matchboard_core::score::{build_score_matrix, train_employment_model, ScoreSource, TrainConfig};
use matchboard_core::SolveRequest;
use matchboard_service::ServeOptions;

use crate::failure::Failure;
use crate::{ReplayArgs, ScheduleArgs, ScoreArgs, ServeArgs, SolveArgs, TrainArgs};

pub const SESSION_ID: &str = "cli";
const ACTOR: &str = "cli";

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Interrupted => "interrupted",
        SolveStatus::Heuristic => "heuristic",
    }
}

fn export_format(path: &Path) -> ExportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => ExportFormat::Json,
        _ => ExportFormat::Csv,
    }
}

fn to_json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

/// The request `solve` runs for these arguments.
pub fn solve_request(args: &SolveArgs) -> Result<SolveRequest, Failure> {
    let manifest = FileManifest::load(&args.manifest)?;
    let instance = load_instance(&manifest)?;
    let matrix = load_scores(&manifest, &instance)?;
    let mut request = SolveRequest::new(instance, matrix);
    if let Some(path) = &args.locks {
        request.locks = parse_locks(&read_text(path)?, &path.display().to_string())?;
    }
    request.cross_ref_bonus = args.bonus;
    request.allow_unassigned = !args.place_all;
    Ok(request)
}

pub fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let request = solve_request(args)?;
    let cancel = CancelToken::new();
    let on_signal = cancel.clone();
    // Already installed only happens in embedded use; the solve still runs.
    let _ = ctrlc::set_handler(move || on_signal.cancel());
    let options = SolveOptions {
        cancel: Some(cancel),
        node_limit: None,
    };
    let assignment = solve_with(&request, &options)?;
    if assignment.status == SolveStatus::Interrupted {
        eprintln!("interrupted: reporting the best placement found so far");
    }
    let report = subscription_report(&assignment.placement, &request);
    let state = board::open_with_assignment(request, &assignment, SESSION_ID.into(), ACTOR)?;
    if let Some(out) = &args.out {
        write_atomic(out, &export_assignment(&state, export_format(out)))?;
    }
    if let Some(path) = &args.report {
        write_atomic(path, &to_json_bytes(&report))?;
    }

    let placed = assignment.placement.values().filter(|v| v.is_some()).count();
    println!("status {}", status_name(assignment.status));
    println!("objective {}", assignment.objective);
    println!("placed {placed}/{}", assignment.placement.len());
    println!("bound {}", assignment.stats.best_bound);
    println!("{:<16} {:>9} {:>11} {:>6}", "location", "cases", "members", "fill");
    for row in &report {
        let mark = if row.undersubscribed {
            " under"
        } else if row.full {
            " full"
        } else {
            ""
        };
        println!(
            "{:<16} {:>9} {:>11} {:>6.2}{mark}",
            row.location_id,
            format!("{}/{}", row.placed_cases, row.case_capacity),
            format!("{}/{}", row.placed_members, row.member_capacity),
            row.fill_ratio,
        );
    }
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    let locations = match (&args.locations, &args.manifest) {
        (Some(path), _) => parse_locations(&read_text(path)?, &path.display().to_string())?,
        (None, Some(m)) => load_instance(&FileManifest::load(m)?)?.locations,
        (None, None) => return Err(Failure::new("USAGE", "train needs --locations or --manifest")),
    };
    let history = load_history_file(&args.history)?;
    let mut config = TrainConfig::default();
    if let Some(l2) = args.l2 {
        config.l2_strength = l2;
    }
    if let Some(n) = args.max_iter {
        config.max_iter = n;
    }
    let model = train_employment_model(&history, &locations, &config)?;
    write_atomic(&args.out, model.to_json().as_bytes())?;
    let meta = &model.training_meta;
    println!("records {}", history.len());
    println!("features {}", model.feature_schema.len());
    println!("iterations {}", meta.iterations);
    println!("loss {}", meta.final_loss);
    println!("converged {}", meta.converged);
    Ok(())
}

pub fn score(args: &ScoreArgs) -> Result<(), Failure> {
    let manifest = FileManifest::load(&args.manifest)?;
    let instance = load_instance(&manifest)?;
    let matrix = match &args.model {
        Some(path) => build_score_matrix(&instance, ScoreSource::Model(&load_model(path)?))?,
        None => load_scores(&manifest, &instance)?,
    };
    write_atomic(&args.out, write_matrix(&matrix).as_bytes())?;
    let compatible = (0..instance.cases.len())
        .flat_map(|i| (0..instance.locations.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| matrix.is_compatible(i, j))
        .count();
    println!("pairs {}", instance.cases.len() * instance.locations.len());
    println!("compatible {compatible}");
    Ok(())
}

pub fn schedule_config(args: &ScheduleArgs) -> ScheduleConfig {
    ScheduleConfig {
        days: args.days,
        min_per_day: args.min,
        max_per_day: args.max,
        max_minutes_per_day: args.cap_minutes,
    }
}

pub fn schedule(args: &ScheduleArgs) -> Result<(), Failure> {
    let raw = load_meetings_file(&args.meetings)?;
    let (meetings, removed) = prepare(&raw);
    let plan = build_schedule(&meetings, &schedule_config(args), args.seed)?;
    if let Some(out) = &args.out {
        write_atomic(out, &to_json_bytes(&plan))?;
    }
    let minutes: BTreeMap<&str, u32> = meetings
        .iter()
        .map(|m| (m.client_id.as_str(), m.duration_minutes))
        .collect();
    println!("meetings {} (duplicates removed {removed})", meetings.len());
    for (d, group) in plan.day_groups.iter().enumerate() {
        let total: u32 = group.iter().map(|id| minutes[id.as_str()]).sum();
        println!(
            "day {} [{} meetings, {total} min]: {}",
            d + 1,
            group.len(),
            group.join(" ")
        );
    }
    println!("cost_km {}", plan.cost);
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new("SERVE_ERROR", e.to_string()))?;
    let options = ServeOptions {
        latency_budget: Duration::from_millis(args.budget_ms),
    };
    eprintln!("serving on http://{} with data in {}", args.bind, args.data.display());
    runtime.block_on(matchboard_service::serve(&args.bind.to_string(), &args.data, options))?;
    Ok(())
}

pub fn replay(args: &ReplayArgs) -> Result<(), Failure> {
    let bytes = std::fs::read(&args.snapshot)
        .map_err(|e| Failure::new("IO_ERROR", format!("{}: {e}", args.snapshot.display())))?;
    let stored = restore_session(&bytes)?;
    let replayed = board::replay(&stored.session_id, &stored.event_log, None)?;
    if replayed != stored || snapshot_session(&replayed) != snapshot_session(&stored) {
        return Err(Failure::new(
            "REPLAY_MISMATCH",
            format!(
                "session {} replays to total {} at revision {}, snapshot holds {} at revision {}",
                stored.session_id, replayed.total_score, replayed.revision, stored.total_score, stored.revision
            ),
        ));
    }
    let shown: BoardState = match args.until {
        Some(rev) => board::replay(&stored.session_id, &stored.event_log, Some(rev))?,
        None => replayed,
    };
    println!("session {}", shown.session_id);
    println!("events {}", stored.event_log.len());
    println!("revision {}", shown.revision);
    println!("total {}", shown.total_score);
    println!("violations {}", shown.violations.len());
    println!("replay matches snapshot");
    Ok(())
}
