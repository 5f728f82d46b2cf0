//! Placement of cases into capacitated locations with human-in-the-loop
//! editing, plus a travel-minimizing day scheduler for geo-located meetings.

pub mod board;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod schedule;
pub mod score;
pub mod synth;

pub use board::{BoardError, BoardState};
pub use model::{Case, Instance, Location, ScoreMatrix, ScoreMode};
pub use optimizer::{solve, Assignment, SolveError, SolveRequest};
