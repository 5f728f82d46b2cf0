//! Match scores. Two backends: preference/attribute alignment for
//! student-to-center allocation, and a regularized logistic model of
//! employment for family-to-affiliate placement.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Case, HouseholdFlag, Instance, Location, MatrixError, ScoreMatrix, ScoreMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("rank {rank} outside 1..={len}")]
    RankOutOfRange { rank: usize, len: usize },
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("case {case} is not eligible for location {location}")]
    IncompatiblePair { case: String, location: String },
    #[error("blend weight alpha = {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("training history needs at least one record of each outcome")]
    DegenerateLabels,
    #[error("feature {column} of record {row} is not a finite number")]
    InvalidFeature { row: usize, column: usize },
    #[error("model features {model:?} do not match instance features {instance:?}")]
    SchemaMismatch { model: Vec<String>, instance: Vec<String> },
    #[error("unknown location {0}")]
    UnknownLocation(String),
    #[error("{mode} scoring needs {needs}")]
    SourceMismatch { mode: ScoreMode, needs: &'static str },
    #[error("unsupported model document: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

impl ScoreError {
    pub fn code(&self) -> &'static str {
        match self {
            ScoreError::RankOutOfRange { .. } => "RANK_OUT_OF_RANGE",
            ScoreError::LengthMismatch { .. } => "LENGTH_MISMATCH",
            ScoreError::IncompatiblePair { .. } => "INCOMPATIBLE_PAIR",
            ScoreError::InvalidAlpha(_) => "INVALID_ALPHA",
            ScoreError::DegenerateLabels => "DEGENERATE_LABELS",
            ScoreError::InvalidFeature { .. } => "INVALID_FEATURE",
            ScoreError::SchemaMismatch { .. } => "SCHEMA_MISMATCH",
            ScoreError::UnknownLocation(_) => "UNKNOWN_LOCATION",
            ScoreError::SourceMismatch { .. } => "SOURCE_MISMATCH",
            ScoreError::ModelFormat(_) => "MODEL_FORMAT",
            ScoreError::Matrix(_) => "INVALID_MATRIX",
        }
    }
}

/// Blend between preference rank (`alpha = 1`) and attribute alignment
/// (`alpha = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub alpha: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { alpha: 0.5 }
    }
}

impl ScoreWeights {
    pub fn new(alpha: f64) -> Result<Self, ScoreError> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(ScoreWeights { alpha })
        } else {
            Err(ScoreError::InvalidAlpha(alpha))
        }
    }
}

/// `(len - rank + 1) / len`: 1.0 for the top choice, `1/len` for the last.
pub fn preference_rank_utility(rank: usize, list_length: usize) -> Result<f64, ScoreError> {
    if rank == 0 || rank > list_length {
        return Err(ScoreError::RankOutOfRange { rank, len: list_length });
    }
    Ok((list_length - rank + 1) as f64 / list_length as f64)
}

/// Cosine similarity of two non-negative level vectors; 0 if either is all zero.
pub fn attribute_alignment(levels: &[f64], desired: &[f64]) -> Result<f64, ScoreError> {
    if levels.len() != desired.len() {
        return Err(ScoreError::LengthMismatch {
            left: levels.len(),
            right: desired.len(),
        });
    }
    let dot: f64 = levels.iter().zip(desired).map(|(a, b)| a * b).sum();
    let na: f64 = levels.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = desired.iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Blended preference/alignment score of an eligible (ranked, not refused) pair.
pub fn goat_score(case: &Case, location: &Location, weights: ScoreWeights) -> Result<f64, ScoreError> {
    let gate = crate::model::compatibility(case, location, ScoreMode::PreferenceAttribute);
    let rank = match case.rank_of(&location.id) {
        Some(rank) if gate.compatible => rank,
        _ => {
            return Err(ScoreError::IncompatiblePair {
                case: case.id.clone(),
                location: location.id.clone(),
            })
        }
    };
    let utility = preference_rank_utility(rank, case.preference_ranks.len())?;
    let alignment = attribute_alignment(&case.attributes.levels, &location.desired_levels)?;
    Ok(weights.alpha * utility + (1.0 - weights.alpha) * alignment)
}

/// Past placement with its 90-day employment outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub case_id: String,
    pub member_count: u32,
    pub languages: BTreeSet<String>,
    pub flags: BTreeSet<HouseholdFlag>,
    pub location_id: String,
    pub employed: bool,
}

/// Member counts are divided by this before entering the model.
pub const MEMBER_COUNT_SCALE: f64 = 10.0;

const BASE_FEATURES: [&str; 4] = ["large_family", "single_parent", "language_match", "member_count_scaled"];

/// Feature extraction for (case, location) pairs against a fixed list of
/// locations: household flags, language match, scaled member count, and a
/// one-hot location indicator.
#[derive(Debug, Clone)]
pub struct FeatureMap<'a> {
    locations: &'a [Location],
}

impl<'a> FeatureMap<'a> {
    pub fn new(locations: &'a [Location]) -> Self {
        FeatureMap { locations }
    }

    pub fn schema(&self) -> Vec<String> {
        BASE_FEATURES
            .iter()
            .map(|s| s.to_string())
            .chain(self.locations.iter().map(|l| format!("location={}", l.id)))
            .collect()
    }

    pub fn len(&self) -> usize {
        BASE_FEATURES.len() + self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extract(
        &self,
        languages: &BTreeSet<String>,
        flags: &BTreeSet<HouseholdFlag>,
        member_count: u32,
        location: usize,
    ) -> Vec<f64> {
        let loc = &self.locations[location];
        let mut x = vec![0.0; self.len()];
        x[0] = flags.contains(&HouseholdFlag::LargeFamily) as u8 as f64;
        x[1] = flags.contains(&HouseholdFlag::SingleParent) as u8 as f64;
        x[2] = languages.iter().any(|l| loc.supported_languages.contains(l)) as u8 as f64;
        x[3] = member_count as f64 / MEMBER_COUNT_SCALE;
        x[BASE_FEATURES.len() + location] = 1.0;
        x
    }

    pub fn for_case(&self, case: &Case, location: usize) -> Vec<f64> {
        self.extract(
            &case.attributes.languages,
            &case.attributes.flags,
            case.member_count,
            location,
        )
    }

    fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2_strength: f64,
    pub max_iter: usize,
    /// Stop once the gradient's Euclidean norm falls to this value.
    pub tolerance: f64,
    pub initial_step: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_strength: 1e-4,
            max_iter: 5000,
            tolerance: 1e-6,
            initial_step: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub final_loss: f64,
    pub l2_strength: f64,
    pub final_gradient_norm: f64,
    /// True when the gradient tolerance was met before `max_iter`.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub feature_schema: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub training_meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub meta: TrainingMeta,
    /// Regularized loss after every accepted step, starting from the initial point.
    pub loss_trace: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean negative log-likelihood of a logistic model plus `l2/2 * |w|^2`.
/// The intercept is not penalized.
pub struct LogisticObjective<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [bool],
    l2: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(features: &'a [Vec<f64>], labels: &'a [bool], l2: f64) -> Result<Self, ScoreError> {
        if features.len() != labels.len() {
            return Err(ScoreError::LengthMismatch {
                left: features.len(),
                right: labels.len(),
            });
        }
        let positives = labels.iter().filter(|&&y| y).count();
        if positives == 0 || positives == labels.len() {
            return Err(ScoreError::DegenerateLabels);
        }
        let width = features[0].len();
        for (row, x) in features.iter().enumerate() {
            if x.len() != width {
                return Err(ScoreError::InvalidFeature {
                    row,
                    column: x.len().min(width),
                });
            }
            if let Some(column) = x.iter().position(|v| !v.is_finite()) {
                return Err(ScoreError::InvalidFeature { row, column });
            }
        }
        Ok(LogisticObjective { features, labels, l2 })
    }

    pub fn dimension(&self) -> usize {
        self.features[0].len()
    }

    fn margin(x: &[f64], weights: &[f64], intercept: f64) -> f64 {
        intercept + x.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn loss(&self, weights: &[f64], intercept: f64) -> f64 {
        let n = self.features.len() as f64;
        let nll: f64 = self
            .features
            .iter()
            .zip(self.labels)
            .map(|(x, &y)| {
                let z = Self::margin(x, weights, intercept);
                softplus(z) - if y { z } else { 0.0 }
            })
            .sum();
        nll / n + 0.5 * self.l2 * weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient with respect to `(weights, intercept)`.
    pub fn gradient(&self, weights: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let n = self.features.len() as f64;
        let mut gw = vec![0.0; weights.len()];
        let mut gb = 0.0;
        for (x, &y) in self.features.iter().zip(self.labels) {
            let r = sigmoid(Self::margin(x, weights, intercept)) - if y { 1.0 } else { 0.0 };
            gb += r;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += r * xi;
            }
        }
        for (g, w) in gw.iter_mut().zip(weights) {
            *g = *g / n + self.l2 * w;
        }
        (gw, gb / n)
    }
}

/// Batch gradient descent from zero. A step that would raise the loss is
/// rejected and the step size halved; the accepted loss trace is therefore
/// non-increasing.
pub fn fit_logistic(features: &[Vec<f64>], labels: &[bool], config: &TrainConfig) -> Result<LogisticFit, ScoreError> {
    if features.is_empty() {
        return Err(ScoreError::DegenerateLabels);
    }
    let objective = LogisticObjective::new(features, labels, config.l2_strength)?;
    let mut weights = vec![0.0; objective.dimension()];
    let mut intercept = 0.0;
    let mut loss = objective.loss(&weights, intercept);
    let mut trace = vec![loss];
    let mut step = config.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm;

    loop {
        let (gw, gb) = objective.gradient(&weights, intercept);
        grad_norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if grad_norm <= config.tolerance {
            converged = true;
            break;
        }
        if iterations >= config.max_iter || step < f64::EPSILON {
            break;
        }
        iterations += 1;
        let cand_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
        let cand_b = intercept - step * gb;
        let cand_loss = objective.loss(&cand_w, cand_b);
        if cand_loss <= loss {
            weights = cand_w;
            intercept = cand_b;
            loss = cand_loss;
            trace.push(loss);
        } else {
            step *= 0.5;
        }
    }

    Ok(LogisticFit {
        weights,
        intercept,
        meta: TrainingMeta {
            iterations,
            final_loss: loss,
            l2_strength: config.l2_strength,
            final_gradient_norm: grad_norm,
            converged,
        },
        loss_trace: trace,
    })
}

/// Fits the employment model on past placements. Locations supply the
/// language-match feature and the one-hot location columns.
pub fn train_employment_model(
    history: &[HistoryRecord],
    locations: &[Location],
    config: &TrainConfig,
) -> Result<TrainedModel, ScoreError> {
    let map = FeatureMap::new(locations);
    let mut features = Vec::with_capacity(history.len());
    let mut labels = Vec::with_capacity(history.len());
    for rec in history {
        let loc = map
            .location_index(&rec.location_id)
            .ok_or_else(|| ScoreError::UnknownLocation(rec.location_id.clone()))?;
        features.push(map.extract(&rec.languages, &rec.flags, rec.member_count, loc));
        labels.push(rec.employed);
    }
    let fit = fit_logistic(&features, &labels, config)?;
    Ok(TrainedModel {
        feature_schema: map.schema(),
        weights: fit.weights,
        intercept: fit.intercept,
        training_meta: fit.meta,
    })
}

impl TrainedModel {
    pub fn probability(&self, features: &[f64]) -> f64 {
        sigmoid(self.intercept + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>())
    }

    fn check_schema(&self, map: &FeatureMap<'_>) -> Result<(), ScoreError> {
        let schema = map.schema();
        if schema != self.feature_schema || self.weights.len() != schema.len() {
            return Err(ScoreError::SchemaMismatch {
                model: self.feature_schema.clone(),
                instance: schema,
            });
        }
        Ok(())
    }
}

/// Per-member employment probability of `case` at `locations[location]`.
pub fn predict_probability(
    model: &TrainedModel,
    locations: &[Location],
    case: &Case,
    location: usize,
) -> Result<f64, ScoreError> {
    let map = FeatureMap::new(locations);
    model.check_schema(&map)?;
    Ok(model.probability(&map.for_case(case, location)))
}

pub const MODEL_FORMAT: &str = "matchboard.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    schema: Vec<String>,
    weights: Vec<f64>,
    intercept: f64,
    meta: TrainingMeta,
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            schema: self.feature_schema.clone(),
            weights: self.weights.clone(),
            intercept: self.intercept,
            meta: self.training_meta.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScoreError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ScoreError::ModelFormat(e.to_string()))?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(ScoreError::ModelFormat(format!("{} v{}", doc.format, doc.version)));
        }
        if doc.weights.len() != doc.schema.len() || doc.weights.iter().any(|w| !w.is_finite()) {
            return Err(ScoreError::ModelFormat("weights do not match schema".into()));
        }
        Ok(TrainedModel {
            feature_schema: doc.schema,
            weights: doc.weights,
            intercept: doc.intercept,
            training_meta: doc.meta,
        })
    }
}

/// Where the match scores come from.
#[derive(Debug, Clone, Copy)]
pub enum ScoreSource<'a> {
    Model(&'a TrainedModel),
    Weights(ScoreWeights),
}

/// Fills the score matrix for a validated instance.
///
/// Outcome mode: expected employed members, `employable_count * p`, for
/// every pair including incompatible ones. Preference mode: the blended
/// score for eligible pairs and 0 elsewhere.
pub fn build_score_matrix(instance: &Instance, source: ScoreSource<'_>) -> Result<ScoreMatrix, ScoreError> {
    match (instance.mode, source) {
        (ScoreMode::OutcomePredicted, ScoreSource::Model(model)) => {
            let map = FeatureMap::new(&instance.locations);
            model.check_schema(&map)?;
            ScoreMatrix::from_fn(instance, |i, j, _| {
                let case = &instance.cases[i];
                let p = model.probability(&map.for_case(case, j));
                Ok(case.employable_count as f64 * p)
            })
        }
        (ScoreMode::PreferenceAttribute, ScoreSource::Weights(weights)) => {
            ScoreWeights::new(weights.alpha)?;
            ScoreMatrix::from_fn(instance, |i, j, gate| {
                if gate.compatible {
                    goat_score(&instance.cases[i], &instance.locations[j], weights)
                } else {
                    Ok(0.0)
                }
            })
        }
        (mode @ ScoreMode::OutcomePredicted, ScoreSource::Weights(_)) => Err(ScoreError::SourceMismatch {
            mode,
            needs: "a trained model",
        }),
        (mode @ ScoreMode::PreferenceAttribute, ScoreSource::Model(_)) => Err(ScoreError::SourceMismatch {
            mode,
            needs: "blend weights",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_utility_examples() {
        assert_eq!(preference_rank_utility(1, 10).unwrap(), 1.0);
        assert_eq!(preference_rank_utility(10, 10).unwrap(), 0.1);
        assert_eq!(preference_rank_utility(3, 4).unwrap(), 0.5);
        assert!(matches!(
            preference_rank_utility(0, 3),
            Err(ScoreError::RankOutOfRange { .. })
        ));
        assert!(matches!(
            preference_rank_utility(4, 3),
            Err(ScoreError::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn rank_utility_strictly_decreasing() {
        for len in 1..12 {
            let u: Vec<f64> = (1..=len).map(|r| preference_rank_utility(r, len).unwrap()).collect();
            assert!(u.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn alignment_examples() {
        let v = [0.2, 0.4, 0.9, 0.1];
        assert!((attribute_alignment(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        a[0] = 1.0;
        b[1] = 1.0;
        assert_eq!(attribute_alignment(&a, &b).unwrap(), 0.0);
        assert!((attribute_alignment(&[0.5, 0.5], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(attribute_alignment(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            attribute_alignment(&[0.1], &[0.1, 0.2]),
            Err(ScoreError::LengthMismatch { left: 1, right: 2 })
        ));
    }

    fn student(prefs: &[&str], levels: Vec<f64>) -> Case {
        let mut c = Case::new("S1");
        c.preference_ranks = prefs.iter().map(|s| s.to_string()).collect();
        c.attributes.levels = levels;
        c
    }

    fn center(id: &str, desired: Vec<f64>) -> Location {
        let mut l = Location::new(id, 1, 1);
        l.desired_levels = desired;
        l
    }

    #[test]
    fn goat_score_degenerate_blends() {
        let c = student(&["A", "B", "C", "D", "E"], vec![1.0, 0.0]);
        let a = center("A", vec![0.0, 1.0]);
        assert_eq!(goat_score(&c, &a, ScoreWeights { alpha: 1.0 }).unwrap(), 1.0);

        let c = student(&["A", "B"], vec![0.3, 0.6]);
        let b = center("B", vec![0.3, 0.6]);
        assert!((goat_score(&c, &b, ScoreWeights { alpha: 0.0 }).unwrap() - 1.0).abs() < 1e-15);

        let c = student(&["A", "B"], vec![1.0, 0.0]);
        assert_eq!(goat_score(&c, &a, ScoreWeights { alpha: 0.5 }).unwrap(), 0.5);
    }

    #[test]
    fn goat_score_rejects_ineligible_pair() {
        let mut c = student(&["A"], vec![]);
        assert!(matches!(
            goat_score(&c, &center("B", vec![]), ScoreWeights::default()),
            Err(ScoreError::IncompatiblePair { .. })
        ));
        c.preference_ranks.clear();
        c.refusals.insert("A".into());
        assert!(goat_score(&c, &center("A", vec![]), ScoreWeights::default()).is_err());
    }

    #[test]
    fn goat_score_monotone_in_rank_and_alignment() {
        let locs: Vec<Location> = ["A", "B", "C", "D"]
            .iter()
            .map(|id| center(id, vec![0.5, 0.5]))
            .collect();
        let c = student(&["A", "B", "C", "D"], vec![0.4, 0.6]);
        let w = ScoreWeights { alpha: 0.3 };
        let s: Vec<f64> = locs.iter().map(|l| goat_score(&c, l, w).unwrap()).collect();
        assert!(s.windows(2).all(|p| p[0] >= p[1]));

        let c = student(&["A"], vec![1.0, 0.0]);
        let worse = goat_score(&c, &center("A", vec![0.2, 1.0]), w).unwrap();
        let better = goat_score(&c, &center("A", vec![1.0, 0.2]), w).unwrap();
        assert!(better >= worse);
    }

    #[test]
    fn empty_history_is_degenerate() {
        let locs = vec![Location::new("A", 1, 1)];
        let err = train_employment_model(&[], &locs, &TrainConfig::default()).unwrap_err();
        assert_eq!(err, ScoreError::DegenerateLabels);
    }

    #[test]
    fn single_class_history_is_degenerate() {
        let x = vec![vec![1.0], vec![0.0]];
        let err = fit_logistic(&x, &[true, true], &TrainConfig::default()).unwrap_err();
        assert_eq!(err.code(), "DEGENERATE_LABELS");
    }

    #[test]
    fn non_finite_feature_rejected() {
        let x = vec![vec![1.0, f64::NAN], vec![0.0, 1.0]];
        let err = fit_logistic(&x, &[true, false], &TrainConfig::default()).unwrap_err();
        assert_eq!(err, ScoreError::InvalidFeature { row: 0, column: 1 });
    }

    /// Each feature pattern carries the same label ratio, so the regularized
    /// optimum sits at zero weights with the intercept at the base-rate log-odds.
    #[test]
    fn independent_outcome_gives_zero_weights() {
        let base_rate: f64 = 0.25;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for pattern in 0..8u32 {
            let row: Vec<f64> = (0..3).map(|b| ((pattern >> b) & 1) as f64).collect();
            for k in 0..4 {
                x.push(row.clone());
                y.push(k == 0);
            }
        }
        let config = TrainConfig {
            l2_strength: 0.01,
            ..TrainConfig::default()
        };
        let fit = fit_logistic(&x, &y, &config).unwrap();
        assert!(fit.meta.converged);
        // strong convexity >= l2 turns the gradient tolerance into a distance bound
        let radius = config.tolerance / config.l2_strength;
        for w in &fit.weights {
            assert!(w.abs() <= radius, "weight {w}");
        }
        let log_odds = (base_rate / (1.0 - base_rate)).ln();
        assert!((fit.intercept - log_odds).abs() <= radius);
    }

    #[test]
    fn loss_trace_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<bool> = x.iter().map(|r| rng.gen::<f64>() < sigmoid(r[0] - r[2])).collect();
        let fit = fit_logistic(&x, &y, &TrainConfig::default()).unwrap();
        assert!(fit.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sigmoid_zero_and_monotone() {
        assert_eq!(sigmoid(0.0), 0.5);
        let mut prev = 0.0;
        for b in -40..=40 {
            let p = sigmoid(b as f64);
            assert!(p >= prev);
            prev = p;
        }
        assert!(sigmoid(40.0) > 1.0 - 1e-15);
    }

    #[test]
    fn model_json_round_trip_and_version_check() {
        let model = TrainedModel {
            feature_schema: vec!["a".into(), "b".into()],
            weights: vec![0.1, -2.5],
            intercept: 0.3,
            training_meta: TrainingMeta {
                iterations: 7,
                final_loss: 0.6,
                l2_strength: 1e-4,
                final_gradient_norm: 1e-7,
                converged: true,
            },
        };
        let text = model.to_json();
        assert_eq!(TrainedModel::from_json(&text).unwrap(), model);
        let bumped = text.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            TrainedModel::from_json(&bumped),
            Err(ScoreError::ModelFormat(_))
        ));
    }

    #[test]
    fn source_must_match_mode() {
        let inst = Instance::empty(ScoreMode::OutcomePredicted);
        let err = build_score_matrix(&inst, ScoreSource::Weights(ScoreWeights::default())).unwrap_err();
        assert_eq!(err.code(), "SOURCE_MISMATCH");
    }
}
