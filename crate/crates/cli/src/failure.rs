use std::fmt;

use matchboard_core::board::BoardError;
use matchboard_core::io::IoError;
use matchboard_core::model::MatrixError;
use matchboard_core::schedule::ScheduleError;
use matchboard_core::score::ScoreError;
use matchboard_core::SolveError;
use matchboard_service::ServiceError;

/// A coded, single-line failure.
#[derive(Debug)]
pub struct Failure {
    pub code: String,
    pub message: String,
}

const INFEASIBLE_CODES: [&str; 2] = ["INFEASIBLE", "INFEASIBLE_LOCKS"];

impl Failure {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Failure {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        if INFEASIBLE_CODES.contains(&self.code.as_str()) {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line: String = self
            .message
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join("; ");
        write!(f, "error[{}]: {}", self.code, line)
    }
}

macro_rules! coded {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(e.code(), e.to_string())
            }
        }
    )*};
}

coded!(IoError, SolveError, BoardError, ScoreError, ScheduleError);

impl From<MatrixError> for Failure {
    fn from(e: MatrixError) -> Self {
        Failure::new("INVALID_MATRIX", e.to_string())
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure::new("SERVE_ERROR", e.to_string())
    }
}
