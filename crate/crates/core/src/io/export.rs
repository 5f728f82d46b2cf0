use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::board::{BoardState, Dimension, Violation};
use crate::optimizer::{Evaluator, UNASSIGNED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format {other:?}; use csv or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub case_id: String,
    pub location_id: String,
    pub pair_score: f64,
    pub locked: bool,
    pub violations: Vec<String>,
}

#[derive(Serialize)]
struct JsonExport<'a> {
    session_id: &'a str,
    revision: u64,
    rows: &'a [ExportRow],
    total_score: f64,
}

/// One row per case in instance order.
pub fn export_rows(state: &BoardState) -> Vec<ExportRow> {
    let req = &state.request;
    let eval = Evaluator::new(req);
    let placement = state.placement_indices();
    req.instance
        .cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let location = state.placement.get(&case.id).cloned().flatten();
            let mut violations = Vec::new();
            for v in &state.violations {
                match v {
                    Violation::Incompatible { case_id, .. } if *case_id == case.id => {
                        violations.push("incompatible".to_string())
                    }
                    Violation::OverCapacity { location_id, dimension } if location.as_ref() == Some(location_id) => {
                        violations.push(
                            match dimension {
                                Dimension::Cases => "over_capacity_cases",
                                Dimension::Members => "over_capacity_members",
                            }
                            .to_string(),
                        )
                    }
                    _ => {}
                }
            }
            ExportRow {
                case_id: case.id.clone(),
                location_id: location.unwrap_or_else(|| UNASSIGNED.to_string()),
                pair_score: eval.pair_score(i, placement[i]),
                locked: state.is_locked(&case.id),
                violations,
            }
        })
        .collect()
}

/// The placement as a deliverable file. CSV ends with a `TOTAL` row whose
/// score column is the board total.
pub fn export_assignment(state: &BoardState, format: ExportFormat) -> Vec<u8> {
    let rows = export_rows(state);
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["case_id", "location_id", "pair_score", "locked", "violations"])
                .expect("in-memory csv");
            for r in &rows {
                w.write_record([
                    r.case_id.clone(),
                    r.location_id.clone(),
                    r.pair_score.to_string(),
                    r.locked.to_string(),
                    r.violations.join("|"),
                ])
                .expect("in-memory csv");
            }
            w.write_record(["TOTAL", "", &state.total_score.to_string(), "", ""])
                .expect("in-memory csv");
            w.into_inner().expect("in-memory csv flush")
        }
        ExportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&JsonExport {
                session_id: &state.session_id,
                revision: state.revision,
                rows: &rows,
                total_score: state.total_score,
            })
            .expect("export serializes");
            out.push(b'\n');
            out
        }
    }
}
