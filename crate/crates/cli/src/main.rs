//! `matchboard`: every engine capability as a batch command.
//!
//! Exit status is 0 on success, 2 when the inputs admit no feasible
//! answer, and 1 for any other failure. Failures print one line to stderr
//! of the form `error[CODE]: message`.

mod commands;
mod failure;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "matchboard",
    version,
    about = "Capacitated placement, scoring, and day scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a placement instance and report location subscription.
    Solve(SolveArgs),
    /// Fit the employment model on past placements.
    Train(TrainArgs),
    /// Write the score matrix for an instance.
    Score(ScoreArgs),
    /// Group meetings into days that minimize travel.
    Schedule(ScheduleArgs),
    /// Serve the HTTP interface.
    Serve(ServeArgs),
    /// Replay a session snapshot's event log and check it reproduces the state.
    Replay(ReplayArgs),
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV of case_id,location_id pins.
    #[arg(long)]
    pub locks: Option<PathBuf>,
    /// Bonus per co-placed cross-reference.
    #[arg(long, default_value_t = 0.0)]
    pub bonus: f64,
    /// Assignment export; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Subscription report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Fail instead of leaving cases unassigned.
    #[arg(long)]
    pub place_all: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Locations CSV that defines the feature columns.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub locations: Option<PathBuf>,
    /// Take the locations from an instance manifest instead.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Trained model; without it the manifest's own score source is used.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub meetings: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub days: u32,
    #[arg(long, default_value_t = 3)]
    pub min: u32,
    #[arg(long, default_value_t = 9)]
    pub max: u32,
    #[arg(long, default_value_t = 360)]
    pub cap_minutes: u32,
    #[arg(long, default_value_t = matchboard_core::schedule::DEFAULT_SEED)]
    pub seed: u64,
    /// Schedule as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long)]
    pub data: PathBuf,
    /// Milliseconds before a request answers 202 with a poll token.
    #[arg(long, default_value_t = 2000)]
    pub budget_ms: u64,
}

#[derive(Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Stop at this revision and print the state there.
    #[arg(long)]
    pub until: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Train(a) => commands::train(&a),
        Command::Score(a) => commands::score(&a),
        Command::Schedule(a) => commands::schedule(&a),
        Command::Serve(a) => commands::serve(&a),
        Command::Replay(a) => commands::replay(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
