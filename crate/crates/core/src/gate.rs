//! Two-step threshold-gated verification.
//!
//! Step 1 asks the activity's identification model who produced the window.
//! The answer is trusted only if its predicted-class probability reaches the
//! model's threshold and names the claimed subject. Step 2 asks the claimed
//! subject's authentication model whether the window is genuine, again
//! trusting the answer only above threshold. Any untrusted answer yields
//! [`VerificationOutcome::FallbackSecondFactor`]; the caller then asks for a
//! second factor such as a one-time code.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityCode, SensorMask};
use crate::authentication::GENUINE;
use crate::error::{Error, Result};
use crate::forest::{DecisionForest, ProbabilityVector};
use crate::ingest::FeatureVector;
use crate::stats::ProbabilityStats;

pub const THRESHOLD_CEILING: f64 = 0.95;
pub const AUTH_FLOOR: f64 = 0.5;
const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// Midpoint of benign and adversarial mean predicted-class probability.
    Midpoint,
    /// A percentile of benign correct-prediction probabilities.
    BenignPercentile { percentile: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self::Midpoint
    }
}

impl std::str::FromStr for ThresholdPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Self::Midpoint),
            "percentile" | "benign-percentile" => Ok(Self::BenignPercentile { percentile: 5.0 }),
            other => Err(Error::Config(format!("unknown threshold policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Identification,
    Authentication,
}

/// Lowest admissible threshold: chance level for identification, the binary
/// argmax floor for authentication.
pub fn threshold_floor(kind: ModelKind, n_classes: usize) -> f64 {
    match kind {
        ModelKind::Identification => 1.0 / n_classes.max(1) as f64,
        ModelKind::Authentication => AUTH_FLOOR,
    }
}

pub fn calibrate_threshold(
    benign: &ProbabilityStats,
    adversarial: &ProbabilityStats,
    policy: ThresholdPolicy,
    kind: ModelKind,
) -> Result<f64> {
    if benign.is_empty() || adversarial.is_empty() {
        return Err(Error::EmptySlice("calibration statistics".into()));
    }
    if !(benign.mean > adversarial.mean) {
        return Err(Error::Calibration { benign: benign.mean, adversarial: adversarial.mean });
    }
    let raw = match policy {
        ThresholdPolicy::Midpoint => (benign.mean + adversarial.mean) / 2.0,
        ThresholdPolicy::BenignPercentile { percentile } => benign.percentile(percentile),
    };
    let floor = threshold_floor(kind, benign.n_classes);
    Ok(raw.clamp(floor, THRESHOLD_CEILING.max(floor)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IdEntry {
    activity: ActivityCode,
    mask: SensorMask,
    tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AuthEntry {
    subject: u32,
    activity: ActivityCode,
    mask: SensorMask,
    tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableFile {
    schema_version: u32,
    identification: Vec<IdEntry>,
    authentication: Vec<AuthEntry>,
}

/// Per-model trust thresholds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdTable {
    pub id: BTreeMap<(ActivityCode, SensorMask), f64>,
    pub auth: BTreeMap<(u32, ActivityCode, SensorMask), f64>,
}

impl ThresholdTable {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TableFile {
            schema_version: TABLE_VERSION,
            identification: self
                .id
                .iter()
                .map(|(&(activity, mask), &tau)| IdEntry { activity, mask, tau })
                .collect(),
            authentication: self
                .auth
                .iter()
                .map(|(&(subject, activity, mask), &tau)| AuthEntry { subject, activity, mask, tau })
                .collect(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: TableFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if file.schema_version != TABLE_VERSION {
            return Err(Error::Parse(format!("unsupported threshold table version {}", file.schema_version)));
        }
        let table = Self {
            id: file.identification.into_iter().map(|e| ((e.activity, e.mask), e.tau)).collect(),
            auth: file
                .authentication
                .into_iter()
                .map(|e| ((e.subject, e.activity, e.mask), e.tau))
                .collect(),
        };
        if let Some(t) = table.id.values().chain(table.auth.values()).find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Parse(format!("threshold {t} outside [0, 1]")));
        }
        Ok(table)
    }
}

/// What the gate needs from a classifier.
pub trait ProbabilisticModel: Sync {
    /// Sorted class labels.
    fn classes(&self) -> &[u32];
    fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityVector>;
}

impl ProbabilisticModel for DecisionForest {
    fn classes(&self) -> &[u32] {
        &self.classes
    }
    fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityVector> {
        DecisionForest::predict_proba(self, x)
    }
}

/// Lookup of deployed models.
pub trait ModelRegistry {
    fn identification(&self, activity: ActivityCode, mask: SensorMask) -> Option<&dyn ProbabilisticModel>;
    fn authentication(&self, subject: u32, activity: ActivityCode, mask: SensorMask) -> Option<&dyn ProbabilisticModel>;
}

/// Trained model sets keyed as on disk.
#[derive(Debug, Clone, Default)]
pub struct ModelStore {
    pub id: BTreeMap<(ActivityCode, SensorMask), DecisionForest>,
    pub auth: BTreeMap<(u32, ActivityCode, SensorMask), DecisionForest>,
}

impl ModelRegistry for ModelStore {
    fn identification(&self, activity: ActivityCode, mask: SensorMask) -> Option<&dyn ProbabilisticModel> {
        self.id.get(&(activity, mask)).map(|m| m as &dyn ProbabilisticModel)
    }
    fn authentication(&self, subject: u32, activity: ActivityCode, mask: SensorMask) -> Option<&dyn ProbabilisticModel> {
        self.auth.get(&(subject, activity, mask)).map(|m| m as &dyn ProbabilisticModel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerificationOutcome {
    Verified,
    FallbackSecondFactor,
    Rejected,
}

impl VerificationOutcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Verified => 0,
            Self::FallbackSecondFactor => 10,
            Self::Rejected => 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationTrace {
    pub claimed_subject: u32,
    pub predicted_subject: u32,
    pub id_probability: f64,
    pub id_threshold: f64,
    /// Genuine-class probability from the claimed subject's model.
    pub auth_probability: Option<f64>,
    pub auth_threshold: Option<f64>,
    pub step_reached: u8,
}

impl VerificationTrace {
    /// The outcome implied by the trace fields alone.
    pub fn replay(&self) -> VerificationOutcome {
        use VerificationOutcome::*;
        if self.id_probability < self.id_threshold || self.predicted_subject != self.claimed_subject {
            return FallbackSecondFactor;
        }
        match (self.auth_probability, self.auth_threshold) {
            (Some(p), Some(t)) => {
                if p.max(1.0 - p) < t {
                    FallbackSecondFactor
                } else if p <= 0.5 {
                    Rejected
                } else {
                    Verified
                }
            }
            _ => FallbackSecondFactor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationDecision {
    pub outcome: VerificationOutcome,
    pub trace: VerificationTrace,
}

/// Runs both steps for one window. Missing models or thresholds are
/// configuration errors, reported before any model is queried.
pub fn verify(
    sample: &FeatureVector,
    claimed_subject: u32,
    models: &dyn ModelRegistry,
    thresholds: &ThresholdTable,
) -> Result<VerificationDecision> {
    let (activity, mask) = (sample.activity, sample.sensor_mask);
    let missing = |what: String| Error::Config(format!("no {what} for activity {activity} mask {mask}"));
    let id_model = models
        .identification(activity, mask)
        .ok_or_else(|| missing("identification model".into()))?;
    let id_threshold = *thresholds
        .id
        .get(&(activity, mask))
        .ok_or_else(|| missing("identification threshold".into()))?;
    let auth_model = models
        .authentication(claimed_subject, activity, mask)
        .ok_or_else(|| missing(format!("authentication model for subject {claimed_subject}")))?;
    let auth_threshold = *thresholds
        .auth
        .get(&(claimed_subject, activity, mask))
        .ok_or_else(|| missing(format!("authentication threshold for subject {claimed_subject}")))?;

    let p = id_model.predict_proba(&sample.values)?;
    let mut trace = VerificationTrace {
        claimed_subject,
        predicted_subject: id_model.classes()[p.argmax()],
        id_probability: p.top1(),
        id_threshold,
        auth_probability: None,
        auth_threshold: None,
        step_reached: 1,
    };
    if trace.id_probability < id_threshold || trace.predicted_subject != claimed_subject {
        return Ok(VerificationDecision { outcome: VerificationOutcome::FallbackSecondFactor, trace });
    }

    let q = auth_model.predict_proba(&sample.values)?;
    let genuine = auth_model
        .classes()
        .iter()
        .position(|&c| c == GENUINE)
        .ok_or_else(|| Error::Config("authentication model lacks a genuine class".into()))?;
    trace.step_reached = 2;
    trace.auth_probability = Some(q.as_slice()[genuine]);
    trace.auth_threshold = Some(auth_threshold);
    Ok(VerificationDecision { outcome: trace.replay(), trace })
}

/// How many adversarial misclassifications would pass a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateStats {
    pub total_samples: usize,
    pub misclassified: usize,
    pub misclassified_above_threshold: usize,
    /// `misclassified_above_threshold / misclassified`, 0 when nothing was
    /// misclassified.
    pub pass_rate: f64,
}

impl GateStats {
    /// Fraction of all samples that were misclassified and still trusted.
    pub fn trusted_error_rate(&self) -> f64 {
        if self.total_samples == 0 {
            0.0
        } else {
            self.misclassified_above_threshold as f64 / self.total_samples as f64
        }
    }
}

pub fn gate_stats(model: &dyn ProbabilisticModel, samples: &[&[f64]], true_labels: &[u32], threshold: f64) -> Result<GateStats> {
    if samples.len() != true_labels.len() {
        return Err(Error::Shape { expected: samples.len(), got: true_labels.len() });
    }
    let mut misclassified = 0;
    let mut above = 0;
    for (x, &label) in samples.iter().zip(true_labels) {
        let p = model.predict_proba(x)?;
        if model.classes()[p.argmax()] != label {
            misclassified += 1;
            if p.top1() >= threshold {
                above += 1;
            }
        }
    }
    Ok(GateStats {
        total_samples: samples.len(),
        misclassified,
        misclassified_above_threshold: above,
        pass_rate: if misclassified == 0 { 0.0 } else { above as f64 / misclassified as f64 },
    })
}
