//! Shared domain types: cases, locations, instances, score matrices, and
//! instance validation. Nothing in here scores or optimizes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Household composition markers carried by a case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HouseholdFlag {
    LargeFamily,
    SingleParent,
}

impl HouseholdFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            HouseholdFlag::LargeFamily => "large_family",
            HouseholdFlag::SingleParent => "single_parent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "large_family" => Some(HouseholdFlag::LargeFamily),
            "single_parent" => Some(HouseholdFlag::SingleParent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttributeBag {
    pub languages: BTreeSet<String>,
    pub nationality: String,
    pub flags: BTreeSet<HouseholdFlag>,
    /// One level in `[0, 1]` per instance attribute dimension.
    pub levels: Vec<f64>,
}

/// A declared link from a case to another case or to a location.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum CrossRef {
    Case(String),
    Location(String),
}

impl CrossRef {
    pub fn target(&self) -> &str {
        match self {
            CrossRef::Case(id) | CrossRef::Location(id) => id,
        }
    }
}

/// A unit to be placed: a family or a student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub display_name: String,
    pub member_count: u32,
    pub employable_count: u32,
    pub attributes: AttributeBag,
    /// Location ids, most preferred first.
    #[serde(default)]
    pub preference_ranks: Vec<String>,
    #[serde(default)]
    pub refusals: BTreeSet<String>,
    #[serde(default)]
    pub cross_refs: BTreeSet<CrossRef>,
}

impl Case {
    /// Minimal single-member case with no attributes; handy for fixtures.
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Case {
            display_name: id.clone(),
            id,
            member_count: 1,
            employable_count: 1,
            attributes: AttributeBag::default(),
            preference_ranks: Vec::new(),
            refusals: BTreeSet::new(),
            cross_refs: BTreeSet::new(),
        }
    }

    /// 1-based rank of `location_id` in this case's preference list.
    pub fn rank_of(&self, location_id: &str) -> Option<usize> {
        self.preference_ranks
            .iter()
            .position(|l| l == location_id)
            .map(|p| p + 1)
    }
}

/// A capacitated destination: an affiliate or a project center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub display_name: String,
    /// Maximum number of cases (C).
    pub case_capacity: u32,
    /// Maximum number of individual members across placed cases (R).
    pub member_capacity: u32,
    #[serde(default)]
    pub supported_languages: BTreeSet<String>,
    #[serde(default)]
    pub services: BTreeSet<String>,
    #[serde(default)]
    pub desired_levels: Vec<f64>,
}

impl Location {
    pub fn new(id: impl Into<String>, case_capacity: u32, member_capacity: u32) -> Self {
        let id = id.into();
        Location {
            display_name: id.clone(),
            id,
            case_capacity,
            member_capacity,
            supported_languages: BTreeSet::new(),
            services: BTreeSet::new(),
            desired_levels: Vec::new(),
        }
    }
}

/// Selects which score backend produces the match scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Scores are expected employed members from a trained outcome model.
    OutcomePredicted,
    /// Scores blend preference rank and attribute alignment.
    PreferenceAttribute,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::OutcomePredicted => "outcome_predicted",
            ScoreMode::PreferenceAttribute => "preference_attribute",
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_ATTRIBUTE_DIMENSION: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub cases: Vec<Case>,
    pub locations: Vec<Location>,
    pub attribute_dimension: usize,
    pub mode: ScoreMode,
}

impl Instance {
    pub fn new(cases: Vec<Case>, locations: Vec<Location>, attribute_dimension: usize, mode: ScoreMode) -> Self {
        Instance {
            cases,
            locations,
            attribute_dimension,
            mode,
        }
    }

    pub fn empty(mode: ScoreMode) -> Self {
        Instance::new(Vec::new(), Vec::new(), DEFAULT_ATTRIBUTE_DIMENSION, mode)
    }

    /// Id → position lookups. Built on demand; first occurrence wins for
    /// duplicated ids (which validation rejects anyway).
    pub fn index(&self) -> InstanceIndex {
        let mut cases = HashMap::with_capacity(self.cases.len());
        for (i, c) in self.cases.iter().enumerate() {
            cases.entry(c.id.clone()).or_insert(i);
        }
        let mut locations = HashMap::with_capacity(self.locations.len());
        for (j, l) in self.locations.iter().enumerate() {
            locations.entry(l.id.clone()).or_insert(j);
        }
        InstanceIndex { cases, locations }
    }
}

#[derive(Debug, Clone, Default)]
pub struct InstanceIndex {
    cases: HashMap<String, usize>,
    locations: HashMap<String, usize>,
}

impl InstanceIndex {
    pub fn case(&self, id: &str) -> Option<usize> {
        self.cases.get(id).copied()
    }

    pub fn location(&self, id: &str) -> Option<usize> {
        self.locations.get(id).copied()
    }
}

/// Why a case-location pair fails the compatibility gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncompatibilityReason {
    LanguageMismatch,
    Refused,
    Unranked,
    /// Informational only; never produced by the compatibility gate.
    ServiceMissing,
}

impl IncompatibilityReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IncompatibilityReason::LanguageMismatch => "language_mismatch",
            IncompatibilityReason::Refused => "refused",
            IncompatibilityReason::Unranked => "unranked",
            IncompatibilityReason::ServiceMissing => "service_missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compatibility {
    pub compatible: bool,
    pub reasons: Vec<IncompatibilityReason>,
}

/// The soft eligibility gate between a case and a location.
///
/// Preference mode: the location must be ranked and not refused.
/// Outcome mode: the case and location must share a language and the
/// location must not be refused. Service tags never affect the outcome.
pub fn compatibility(case: &Case, location: &Location, mode: ScoreMode) -> Compatibility {
    let mut reasons = Vec::new();
    match mode {
        ScoreMode::PreferenceAttribute => {
            if case.rank_of(&location.id).is_none() {
                reasons.push(IncompatibilityReason::Unranked);
            }
        }
        ScoreMode::OutcomePredicted => {
            let shared = case
                .attributes
                .languages
                .iter()
                .any(|l| location.supported_languages.contains(l));
            if !shared {
                reasons.push(IncompatibilityReason::LanguageMismatch);
            }
        }
    }
    if case.refusals.contains(&location.id) {
        reasons.push(IncompatibilityReason::Refused);
    }
    Compatibility {
        compatible: reasons.is_empty(),
        reasons,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReasons {
    pub case: usize,
    pub location: usize,
    pub reasons: Vec<IncompatibilityReason>,
}

/// Dense per-pair scores and compatibility mask, row-major by case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub case_ids: Vec<String>,
    pub location_ids: Vec<String>,
    scores: Vec<f64>,
    compatible: Vec<bool>,
    /// One entry per incompatible pair, in row-major order.
    reasons: Vec<PairReasons>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("score matrix expects {expected} entries, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("score at ({case}, {location}) is {value}; scores must be finite and non-negative")]
    InvalidScore { case: String, location: String, value: f64 },
}

impl ScoreMatrix {
    /// Builds a matrix from row-major scores and mask; reasons default to
    /// empty for every incompatible pair.
    pub fn new(
        case_ids: Vec<String>,
        location_ids: Vec<String>,
        scores: Vec<f64>,
        compatible: Vec<bool>,
    ) -> Result<Self, MatrixError> {
        let expected = case_ids.len() * location_ids.len();
        if scores.len() != expected || compatible.len() != expected {
            return Err(MatrixError::Shape {
                expected,
                actual: scores.len().min(compatible.len()),
            });
        }
        let n_loc = location_ids.len();
        for (k, &v) in scores.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(MatrixError::InvalidScore {
                    case: case_ids[k / n_loc].clone(),
                    location: location_ids[k % n_loc].clone(),
                    value: v,
                });
            }
        }
        let reasons = compatible
            .iter()
            .enumerate()
            .filter(|(_, &ok)| !ok)
            .map(|(k, _)| PairReasons {
                case: k / n_loc,
                location: k % n_loc,
                reasons: Vec::new(),
            })
            .collect();
        Ok(ScoreMatrix {
            case_ids,
            location_ids,
            scores,
            compatible,
            reasons,
        })
    }

    /// Matrix for `instance` with every pair's compatibility and reasons
    /// filled from the gate and scores taken from `score(case, location)`.
    pub fn from_fn<E>(
        instance: &Instance,
        mut score: impl FnMut(usize, usize, &Compatibility) -> Result<f64, E>,
    ) -> Result<Self, E>
    where
        E: From<MatrixError>,
    {
        let n_loc = instance.locations.len();
        let mut scores = Vec::with_capacity(instance.cases.len() * n_loc);
        let mut compatible = Vec::with_capacity(scores.capacity());
        let mut reasons = Vec::new();
        for (i, case) in instance.cases.iter().enumerate() {
            for (j, loc) in instance.locations.iter().enumerate() {
                let gate = compatibility(case, loc, instance.mode);
                let v = score(i, j, &gate)?;
                if !v.is_finite() || v < 0.0 {
                    return Err(MatrixError::InvalidScore {
                        case: case.id.clone(),
                        location: loc.id.clone(),
                        value: v,
                    }
                    .into());
                }
                scores.push(v);
                compatible.push(gate.compatible);
                if !gate.compatible {
                    reasons.push(PairReasons {
                        case: i,
                        location: j,
                        reasons: gate.reasons,
                    });
                }
            }
        }
        Ok(ScoreMatrix {
            case_ids: instance.cases.iter().map(|c| c.id.clone()).collect(),
            location_ids: instance.locations.iter().map(|l| l.id.clone()).collect(),
            scores,
            compatible,
            reasons,
        })
    }

    pub fn n_cases(&self) -> usize {
        self.case_ids.len()
    }

    pub fn n_locations(&self) -> usize {
        self.location_ids.len()
    }

    #[inline]
    pub fn score(&self, case: usize, location: usize) -> f64 {
        self.scores[case * self.location_ids.len() + location]
    }

    #[inline]
    pub fn is_compatible(&self, case: usize, location: usize) -> bool {
        self.compatible[case * self.location_ids.len() + location]
    }

    pub fn reasons(&self, case: usize, location: usize) -> &[IncompatibilityReason] {
        self.reasons
            .binary_search_by(|p| (p.case, p.location).cmp(&(case, location)))
            .map(|k| self.reasons[k].reasons.as_slice())
            .unwrap_or(&[])
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Re-checks shape, score validity, and reason ordering; for matrices
    /// that arrived through deserialization rather than a constructor.
    pub fn check(&self) -> Result<(), MatrixError> {
        let n_loc = self.location_ids.len();
        let expected = self.case_ids.len() * n_loc;
        if self.scores.len() != expected || self.compatible.len() != expected {
            return Err(MatrixError::Shape {
                expected,
                actual: self.scores.len().min(self.compatible.len()),
            });
        }
        if let Some(k) = self.scores.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(MatrixError::InvalidScore {
                case: self.case_ids[k / n_loc].clone(),
                location: self.location_ids[k % n_loc].clone(),
                value: self.scores[k],
            });
        }
        let ordered = self
            .reasons
            .windows(2)
            .all(|w| (w[0].case, w[0].location) < (w[1].case, w[1].location));
        let in_range = self
            .reasons
            .iter()
            .all(|p| p.case < self.case_ids.len() && p.location < n_loc);
        if !ordered || !in_range {
            return Err(MatrixError::Shape {
                expected,
                actual: self.reasons.len(),
            });
        }
        Ok(())
    }

    /// True when the rows and columns line up with the instance's ids.
    pub fn matches(&self, instance: &Instance) -> bool {
        self.case_ids.len() == instance.cases.len()
            && self.location_ids.len() == instance.locations.len()
            && self.case_ids.iter().zip(&instance.cases).all(|(a, c)| *a == c.id)
            && self
                .location_ids
                .iter()
                .zip(&instance.locations)
                .all(|(a, l)| *a == l.id)
            && self.scores.len() == self.case_ids.len() * self.location_ids.len()
            && self.compatible.len() == self.scores.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    DuplicateId,
    DanglingRef,
    InvalidMemberCount,
    EmployableExceedsMembers,
    DuplicatePreference,
    PreferenceRefused,
    SelfReference,
    DimensionMismatch,
    LevelOutOfRange,
    EmptyInstance,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::DuplicateId => "DUPLICATE_ID",
            IssueCode::DanglingRef => "DANGLING_REF",
            IssueCode::InvalidMemberCount => "INVALID_MEMBER_COUNT",
            IssueCode::EmployableExceedsMembers => "EMPLOYABLE_EXCEEDS_MEMBERS",
            IssueCode::DuplicatePreference => "DUPLICATE_PREFERENCE",
            IssueCode::PreferenceRefused => "PREFERENCE_REFUSED",
            IssueCode::SelfReference => "SELF_REFERENCE",
            IssueCode::DimensionMismatch => "DIMENSION_MISMATCH",
            IssueCode::LevelOutOfRange => "LEVEL_OUT_OF_RANGE",
            IssueCode::EmptyInstance => "EMPTY_INSTANCE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    /// The offending id (for dangling references, the unresolved target).
    pub id: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}): {}", self.code.as_str(), self.id, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, code: IssueCode, id: &str, message: String) {
        self.errors.push(ValidationIssue {
            code,
            id: id.to_string(),
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for issue in &self.errors {
            if !first {
                f.write_str("; ")?;
            }
            first = false;
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

fn check_levels(report: &mut ValidationReport, owner: &str, levels: &[f64], dim: usize) {
    if levels.len() != dim {
        report.error(
            IssueCode::DimensionMismatch,
            owner,
            format!("expected {dim} attribute levels, found {}", levels.len()),
        );
    }
    if let Some(bad) = levels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        report.error(
            IssueCode::LevelOutOfRange,
            owner,
            format!("attribute level {bad} outside [0, 1]"),
        );
    }
}

/// Checks every structural invariant of an instance. Pure: the same input
/// always yields the same report, in the same order.
pub fn validate_instance(instance: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let dim = instance.attribute_dimension;

    if instance.cases.is_empty() && instance.locations.is_empty() {
        report.warnings.push(ValidationIssue {
            code: IssueCode::EmptyInstance,
            id: String::new(),
            message: "instance has no cases and no locations".into(),
        });
    }

    let mut seen = HashSet::new();
    for c in &instance.cases {
        if !seen.insert(c.id.as_str()) {
            report.error(IssueCode::DuplicateId, &c.id, "case id appears more than once".into());
        }
    }
    let case_ids = seen;
    let mut location_ids = HashSet::new();
    for l in &instance.locations {
        if !location_ids.insert(l.id.as_str()) {
            report.error(
                IssueCode::DuplicateId,
                &l.id,
                "location id appears more than once".into(),
            );
        }
    }

    for c in &instance.cases {
        if c.member_count == 0 {
            report.error(
                IssueCode::InvalidMemberCount,
                &c.id,
                "member_count must be at least 1".into(),
            );
        }
        if c.employable_count > c.member_count {
            report.error(
                IssueCode::EmployableExceedsMembers,
                &c.id,
                format!(
                    "employable_count {} exceeds member_count {}",
                    c.employable_count, c.member_count
                ),
            );
        }
        check_levels(&mut report, &c.id, &c.attributes.levels, dim);

        let mut ranked = HashSet::new();
        for loc in &c.preference_ranks {
            if !location_ids.contains(loc.as_str()) {
                report.error(
                    IssueCode::DanglingRef,
                    loc,
                    format!("case {} ranks unknown location", c.id),
                );
            }
            if !ranked.insert(loc.as_str()) {
                report.error(
                    IssueCode::DuplicatePreference,
                    &c.id,
                    format!("location {loc} ranked twice"),
                );
            }
            if c.refusals.contains(loc) {
                report.error(
                    IssueCode::PreferenceRefused,
                    &c.id,
                    format!("location {loc} is both ranked and refused"),
                );
            }
        }
        for loc in &c.refusals {
            if !location_ids.contains(loc.as_str()) {
                report.error(
                    IssueCode::DanglingRef,
                    loc,
                    format!("case {} refuses unknown location", c.id),
                );
            }
        }
        for link in &c.cross_refs {
            match link {
                CrossRef::Case(other) => {
                    if other == &c.id {
                        report.error(IssueCode::SelfReference, &c.id, "case cross-references itself".into());
                    } else if !case_ids.contains(other.as_str()) {
                        report.error(
                            IssueCode::DanglingRef,
                            other,
                            format!("case {} links unknown case", c.id),
                        );
                    }
                }
                CrossRef::Location(loc) => {
                    if !location_ids.contains(loc.as_str()) {
                        report.error(
                            IssueCode::DanglingRef,
                            loc,
                            format!("case {} links unknown location", c.id),
                        );
                    }
                }
            }
        }
    }

    for l in &instance.locations {
        check_levels(&mut report, &l.id, &l.desired_levels, dim);
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc(id: &str) -> Location {
        Location::new(id, 1, 1)
    }

    fn instance(cases: Vec<Case>, locations: Vec<Location>) -> Instance {
        Instance::new(cases, locations, 0, ScoreMode::PreferenceAttribute)
    }

    #[test]
    fn duplicate_case_id_is_reported() {
        let inst = instance(vec![Case::new("F1"), Case::new("F1")], vec![loc("A")]);
        let report = validate_instance(&inst);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].code, IssueCode::DuplicateId);
        assert_eq!(report.errors[0].id, "F1");
    }

    #[test]
    fn empty_instance_is_valid_with_warning() {
        let report = validate_instance(&instance(vec![], vec![]));
        assert!(report.is_valid());
        assert_eq!(report.warnings[0].code, IssueCode::EmptyInstance);
    }

    #[test]
    fn unknown_ranked_location_is_dangling() {
        let mut c = Case::new("F1");
        c.preference_ranks = vec!["A".into(), "Z".into()];
        let report = validate_instance(&instance(vec![c], vec![loc("A")]));
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].code, IssueCode::DanglingRef);
        assert_eq!(report.errors[0].id, "Z");
    }

    #[test]
    fn case_invariants() {
        let mut c = Case::new("F1");
        c.member_count = 0;
        c.employable_count = 1;
        c.preference_ranks = vec!["A".into(), "A".into()];
        c.refusals.insert("A".into());
        c.cross_refs.insert(CrossRef::Case("F1".into()));
        let report = validate_instance(&instance(vec![c], vec![loc("A")]));
        let codes: Vec<_> = report.errors.iter().map(|e| e.code).collect();
        assert!(codes.contains(&IssueCode::InvalidMemberCount));
        assert!(codes.contains(&IssueCode::EmployableExceedsMembers));
        assert!(codes.contains(&IssueCode::DuplicatePreference));
        assert!(codes.contains(&IssueCode::PreferenceRefused));
        assert!(codes.contains(&IssueCode::SelfReference));
    }

    #[test]
    fn level_dimension_and_range() {
        let mut c = Case::new("F1");
        c.attributes.levels = vec![0.5, 1.5];
        let mut l = loc("A");
        l.desired_levels = vec![0.1];
        let mut inst = instance(vec![c], vec![l]);
        inst.attribute_dimension = 2;
        let codes: Vec<_> = validate_instance(&inst)
            .errors
            .iter()
            .map(|e| (e.code, e.id.clone()))
            .collect();
        assert_eq!(
            codes,
            vec![
                (IssueCode::LevelOutOfRange, "F1".to_string()),
                (IssueCode::DimensionMismatch, "A".to_string()),
            ]
        );
    }

    #[test]
    fn validation_is_pure() {
        let mut c = Case::new("F1");
        c.preference_ranks = vec!["Q".into()];
        let inst = instance(vec![c, Case::new("F1")], vec![loc("A")]);
        assert_eq!(validate_instance(&inst), validate_instance(&inst));
    }

    #[test]
    fn unranked_location_is_incompatible() {
        let mut c = Case::new("S1");
        c.preference_ranks = vec!["A".into(), "B".into()];
        let gate = compatibility(&c, &loc("C"), ScoreMode::PreferenceAttribute);
        assert!(!gate.compatible);
        assert_eq!(gate.reasons, vec![IncompatibilityReason::Unranked]);
        assert!(compatibility(&c, &loc("B"), ScoreMode::PreferenceAttribute).compatible);
    }

    #[test]
    fn shared_language_is_compatible() {
        let mut c = Case::new("F1");
        c.attributes.languages = ["ar".to_string()].into();
        let mut l = loc("A");
        l.supported_languages = ["ar".to_string(), "en".to_string()].into();
        let gate = compatibility(&c, &l, ScoreMode::OutcomePredicted);
        assert!(gate.compatible);
        assert!(gate.reasons.is_empty());
    }

    #[test]
    fn missing_language_is_mismatch() {
        let mut c = Case::new("F1");
        c.attributes.languages = ["so".to_string()].into();
        let mut l = loc("A");
        l.supported_languages = ["en".to_string()].into();
        let gate = compatibility(&c, &l, ScoreMode::OutcomePredicted);
        assert_eq!(gate.reasons, vec![IncompatibilityReason::LanguageMismatch]);
    }

    #[test]
    fn refusal_reported_alongside_other_reasons() {
        let mut c = Case::new("F1");
        c.refusals.insert("A".into());
        let gate = compatibility(&c, &loc("A"), ScoreMode::OutcomePredicted);
        assert_eq!(
            gate.reasons,
            vec![IncompatibilityReason::LanguageMismatch, IncompatibilityReason::Refused]
        );
    }

    #[test]
    fn empty_preferences_never_compatible() {
        let c = Case::new("S1");
        for id in ["A", "B", "C"] {
            assert!(!compatibility(&c, &loc(id), ScoreMode::PreferenceAttribute).compatible);
        }
    }

    #[test]
    fn matrix_reason_lookup() {
        let mut c = Case::new("F1");
        c.preference_ranks = vec!["B".into()];
        let inst = instance(vec![c], vec![loc("A"), loc("B")]);
        let m = ScoreMatrix::from_fn::<MatrixError>(&inst, |_, _, _| Ok(0.25)).unwrap();
        assert!(m.matches(&inst));
        assert!(!m.is_compatible(0, 0));
        assert_eq!(m.reasons(0, 0), &[IncompatibilityReason::Unranked]);
        assert!(m.reasons(0, 1).is_empty());
    }

    #[test]
    fn matrix_rejects_negative_scores() {
        let err = ScoreMatrix::new(vec!["a".into()], vec!["x".into()], vec![-1.0], vec![true]).unwrap_err();
        assert!(matches!(err, MatrixError::InvalidScore { .. }));
    }
}
