//! Flat-file ingest, session snapshots, and assignment exports.
//!
//! Every write goes through [`write_atomic`]: a temporary file in the
//! target directory that is renamed over the destination once complete.

mod export;
mod formats;
mod snapshot;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{validate_instance, Instance, ScoreMatrix, ScoreMode, ValidationReport};
use crate::schedule::Meeting;
use crate::score::{build_score_matrix, HistoryRecord, ScoreSource, ScoreWeights, TrainedModel};

pub use export::{export_assignment, export_rows, ExportFormat, ExportRow};
pub use formats::{
    parse_cases, parse_history, parse_locations, parse_locks, parse_matrix, parse_meetings, write_cases, write_history,
    write_locations, write_locks, write_matrix, write_meetings,
};
pub use snapshot::{
    load_snapshots, restore_session, save_snapshot, snapshot_path, snapshot_session, SNAPSHOT_FORMAT, SNAPSHOT_VERSION,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IoError {
    #[error("{file}:{line}:{column}: {reason}")]
    Parse {
        file: String,
        line: u64,
        column: usize,
        reason: String,
    },
    #[error("instance failed validation: {0}")]
    Validation(ValidationReport),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("scores: {0}")]
    Score(String),
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            IoError::Parse { .. } => "PARSE_ERROR",
            IoError::Validation(_) => "VALIDATION_FAILED",
            IoError::Snapshot(_) => "SNAPSHOT_ERROR",
            IoError::Manifest(_) => "MANIFEST_ERROR",
            IoError::Io { .. } => "IO_ERROR",
            IoError::Score(_) => "SCORE_ERROR",
        }
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename, so
/// readers see either the old content or the new, never a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

/// Names the input files of one instance. Relative paths resolve against
/// the manifest's own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileManifest {
    pub format_version: u32,
    #[serde(default = "default_mode")]
    pub mode: ScoreMode,
    /// Length of every level vector; inferred from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_dimension: Option<usize>,
    pub cases: PathBuf,
    pub locations: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meetings: Option<PathBuf>,
    /// Trained employment model used for outcome-mode scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Precomputed score matrix; takes precedence over `model` and `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    /// Preference weight for preference-mode scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_mode() -> ScoreMode {
    ScoreMode::OutcomePredicted
}

impl FileManifest {
    pub fn new(cases: impl Into<PathBuf>, locations: impl Into<PathBuf>, mode: ScoreMode) -> Self {
        FileManifest {
            format_version: MANIFEST_VERSION,
            mode,
            attribute_dimension: None,
            cases: cases.into(),
            locations: locations.into(),
            history: None,
            meetings: None,
            model: None,
            matrix: None,
            alpha: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = read_text(path)?;
        let mut manifest: FileManifest =
            serde_json::from_str(&text).map_err(|e| IoError::Manifest(format!("{}: {e}", path.display())))?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(IoError::Manifest(format!(
                "format_version {} is not supported (expected {MANIFEST_VERSION})",
                manifest.format_version
            )));
        }
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// Parses both instance files and returns the instance only if it validates.
pub fn load_instance(manifest: &FileManifest) -> Result<Instance, IoError> {
    let cases_path = manifest.resolve(&manifest.cases);
    let locations_path = manifest.resolve(&manifest.locations);
    let cases = parse_cases(&read_text(&cases_path)?, &cases_path.display().to_string())?;
    let locations = parse_locations(&read_text(&locations_path)?, &locations_path.display().to_string())?;
    let dimension = manifest.attribute_dimension.unwrap_or_else(|| {
        cases
            .first()
            .map(|c| c.attributes.levels.len())
            .or_else(|| locations.first().map(|l| l.desired_levels.len()))
            .unwrap_or(0)
    });
    let instance = Instance::new(cases, locations, dimension, manifest.mode);
    let report = validate_instance(&instance);
    if !report.is_valid() {
        return Err(IoError::Validation(report));
    }
    Ok(instance)
}

pub fn load_history(manifest: &FileManifest) -> Result<Vec<HistoryRecord>, IoError> {
    let path = manifest
        .history
        .as_ref()
        .ok_or_else(|| IoError::Manifest("no history file listed".into()))?;
    load_history_file(&manifest.resolve(path))
}

pub fn load_history_file(path: &Path) -> Result<Vec<HistoryRecord>, IoError> {
    parse_history(&read_text(path)?, &path.display().to_string())
}

pub fn load_meetings(manifest: &FileManifest) -> Result<Vec<Meeting>, IoError> {
    let path = manifest
        .meetings
        .as_ref()
        .ok_or_else(|| IoError::Manifest("no meetings file listed".into()))?;
    load_meetings_file(&manifest.resolve(path))
}

pub fn load_meetings_file(path: &Path) -> Result<Vec<Meeting>, IoError> {
    parse_meetings(&read_text(path)?, &path.display().to_string())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, IoError> {
    TrainedModel::from_json(&read_text(path)?).map_err(|e| IoError::Score(e.to_string()))
}

/// The score matrix for a loaded instance: the manifest's matrix file if
/// present, else its model (outcome mode), else preference weights.
pub fn load_scores(manifest: &FileManifest, instance: &Instance) -> Result<ScoreMatrix, IoError> {
    if let Some(p) = &manifest.matrix {
        let path = manifest.resolve(p);
        return parse_matrix(&read_text(&path)?, &path.display().to_string(), instance);
    }
    let scored = match (instance.mode, &manifest.model) {
        (ScoreMode::OutcomePredicted, Some(p)) => {
            let model = load_model(&manifest.resolve(p))?;
            build_score_matrix(instance, ScoreSource::Model(&model))
        }
        (ScoreMode::OutcomePredicted, None) => {
            return Err(IoError::Manifest("outcome mode needs a model or a matrix file".into()))
        }
        (ScoreMode::PreferenceAttribute, _) => {
            let weights = match manifest.alpha {
                Some(a) => ScoreWeights::new(a).map_err(|e| IoError::Score(e.to_string()))?,
                None => ScoreWeights::default(),
            };
            build_score_matrix(instance, ScoreSource::Weights(weights))
        }
    };
    scored.map_err(|e| IoError::Score(e.to_string()))
}

/// Writes `cases.csv`, `locations.csv`, and `manifest.json` into `dir`.
pub fn export_instance(instance: &Instance, dir: &Path) -> Result<FileManifest, IoError> {
    write_atomic(&dir.join("cases.csv"), write_cases(&instance.cases).as_bytes())?;
    write_atomic(
        &dir.join("locations.csv"),
        write_locations(&instance.locations).as_bytes(),
    )?;
    let mut manifest = FileManifest::new("cases.csv", "locations.csv", instance.mode);
    manifest.attribute_dimension = Some(instance.attribute_dimension);
    manifest.save(&dir.join("manifest.json"))?;
    manifest.base_dir = dir.to_path_buf();
    Ok(manifest)
}
