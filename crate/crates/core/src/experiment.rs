//! End-to-end runs shared by the CLI and the acceptance suite: train a
//! victim on a holdout split, attack its test windows, measure the
//! benign/adversarial probability gap, calibrate a threshold and count what
//! the gate lets through.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::{ActivityCode, SensorMask};
use crate::attack::{attack_dataset, AttackConfig, DatasetAttack, FeatureScaler};
use crate::authentication::{
    build_auth_split, genuine_scores, roc_and_eer, train_authentication, AuthSplit, EerEntry, GENUINE,
    MIN_GENUINE_WINDOWS,
};
use crate::error::{Error, Result};
use crate::forest::{DecisionForest, ForestParams, ProbabilityVector};
use crate::gate::{calibrate_threshold, gate_stats, GateStats, ModelKind, ThresholdPolicy, THRESHOLD_CEILING};
use crate::identification::{activity_slice, Slice};
use crate::ingest::Dataset;
use crate::seed;
use crate::stats::{Condition, ProbabilityStats};

pub const DEFAULT_TEST_FRACTION: f64 = 0.3;

/// Per-class seeded holdout: `round(n_c · test_fraction)` of each class go
/// to the test side, at least one and never all.
pub fn holdout_split(labels: &[u32], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (&class, idx) in &by_class {
        if idx.len() < 2 {
            return Err(Error::Stratification { class: class.to_string(), count: idx.len(), k: 2 });
        }
        let mut idx = idx.clone();
        idx.shuffle(&mut seed::rng(seed, &[0x686f6c64, class as u64]));
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Attack settings with the clip box defaulted to the training range.
fn attack_config_for(scaler: &FeatureScaler, cfg: &AttackConfig) -> AttackConfig {
    let mut cfg = cfg.clone();
    if cfg.clip.is_empty() {
        cfg.clip = scaler.normalized_bounds();
    }
    cfg
}

/// Attacks `rows` against `model` in z-scored space; returns the attack
/// summary and the perturbed rows in original units.
pub fn attack_in_normalized_space(
    model: &DecisionForest,
    scaler: &FeatureScaler,
    rows: &[&[f64]],
    labels: &[u32],
    cfg: &AttackConfig,
) -> Result<(DatasetAttack, Vec<Vec<f64>>)> {
    let true_classes = labels
        .iter()
        .map(|&l| {
            model
                .class_index(l)
                .ok_or_else(|| Error::Training(format!("label {l} unknown to the victim model")))
        })
        .collect::<Result<Vec<_>>>()?;
    let normalized: Vec<Vec<f64>> = rows.iter().map(|r| scaler.normalize(r)).collect();
    let normalized_refs: Vec<&[f64]> = normalized.iter().map(Vec::as_slice).collect();
    let victim = |z: &[f64]| -> ProbabilityVector {
        model
            .predict_proba(&scaler.denormalize(z))
            .expect("attack preserves dimensionality")
    };
    let attack = attack_dataset(&victim, &normalized_refs, &true_classes, &attack_config_for(scaler, cfg))?;
    let perturbed = attack.results.iter().map(|r| scaler.denormalize(&r.perturbed)).collect();
    Ok((attack, perturbed))
}

/// Threshold from the calibration rule; when the premise fails the ceiling
/// is used so the gate trusts as little as possible.
pub fn calibrate_or_ceiling(
    benign: &ProbabilityStats,
    adversarial: &ProbabilityStats,
    policy: ThresholdPolicy,
    kind: ModelKind,
) -> (f64, bool) {
    match calibrate_threshold(benign, adversarial, policy, kind) {
        Ok(t) => (t, true),
        Err(_) => (THRESHOLD_CEILING, false),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub forest: ForestParams,
    pub attack: AttackConfig,
    pub policy: ThresholdPolicy,
    pub test_fraction: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            forest: ForestParams::default(),
            attack: AttackConfig::default(),
            policy: ThresholdPolicy::Midpoint,
            test_fraction: DEFAULT_TEST_FRACTION,
            seed,
        }
    }
}

/// A trained identification model with the held-out windows it has not
/// seen and the scaler fitted on its training windows.
#[derive(Debug, Clone)]
pub struct IdentificationSetup {
    pub activity: ActivityCode,
    pub mask: SensorMask,
    pub model: DecisionForest,
    pub scaler: FeatureScaler,
    pub test_rows: Vec<Vec<f64>>,
    /// True subject of each test row.
    pub test_labels: Vec<u32>,
}

fn id_seed(cfg: &ExperimentConfig, activity: ActivityCode, mask: SensorMask) -> u64 {
    seed::derive(cfg.seed, &[activity.code() as u64, mask.bits() as u64])
}

fn auth_seed(cfg: &ExperimentConfig, subject: u32, activity: ActivityCode, mask: SensorMask) -> u64 {
    seed::derive(cfg.seed, &[subject as u64, activity.code() as u64, mask.bits() as u64])
}

/// `dataset` must already carry rows for `mask` (see [`Dataset::with_mask`]).
pub fn prepare_identification(dataset: &Dataset, activity: ActivityCode, mask: SensorMask, cfg: &ExperimentConfig) -> Result<IdentificationSetup> {
    let vectors = activity_slice(dataset, activity, mask, 2)?;
    let slice = Slice::from_vectors(&vectors);
    let run_seed = id_seed(cfg, activity, mask);
    let (train_idx, test_idx) = holdout_split(&slice.labels, cfg.test_fraction, run_seed)?;
    let (train, test) = (slice.subset(&train_idx), slice.subset(&test_idx));
    let model = DecisionForest::train(&train.rows, &train.labels, &cfg.forest, seed::derive(run_seed, &[1]))?;
    let scaler = FeatureScaler::fit(&train.rows)?;
    Ok(IdentificationSetup {
        activity,
        mask,
        model,
        scaler,
        test_rows: test.rows.iter().map(|r| r.to_vec()).collect(),
        test_labels: test.labels,
    })
}

pub fn attack_identification(setup: &IdentificationSetup, cfg: &ExperimentConfig) -> Result<(DatasetAttack, Vec<Vec<f64>>)> {
    let attack_cfg = AttackConfig {
        seed: seed::derive(id_seed(cfg, setup.activity, setup.mask), &[2]),
        ..cfg.attack.clone()
    };
    let rows: Vec<&[f64]> = setup.test_rows.iter().map(Vec::as_slice).collect();
    attack_in_normalized_space(&setup.model, &setup.scaler, &rows, &setup.test_labels, &attack_cfg)
}

fn top1_stats(model: &DecisionForest, rows: &[&[f64]], condition: Condition) -> Result<ProbabilityStats> {
    let probas = rows.iter().map(|x| model.predict_proba(x)).collect::<Result<Vec<_>>>()?;
    ProbabilityStats::from_probabilities(&probas, condition)
}

/// Benign/adversarial statistics, calibrated threshold and gate counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationSummary {
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub benign: ProbabilityStats,
    pub adversarial: ProbabilityStats,
    pub threshold: f64,
    pub calibrated: bool,
    pub gate: GateStats,
}

impl IdentificationSummary {
    /// Error rate of the victim on the perturbed windows.
    pub fn adversarial_error(&self) -> f64 {
        1.0 - self.accuracy_after
    }

    pub fn probability_gap(&self) -> f64 {
        self.benign.mean - self.adversarial.mean
    }
}

/// Summarizes a model against benign and adversarial windows. With
/// `threshold` set the gate uses it instead of calibrating.
pub fn summarize_identification(
    model: &DecisionForest,
    benign_rows: &[&[f64]],
    adversarial_rows: &[&[f64]],
    labels: &[u32],
    policy: ThresholdPolicy,
    threshold: Option<f64>,
) -> Result<IdentificationSummary> {
    let benign = top1_stats(model, benign_rows, Condition::Benign)?;
    let adversarial = top1_stats(model, adversarial_rows, Condition::Adversarial)?;
    let (threshold, calibrated) = match threshold {
        Some(t) => (t, true),
        None => calibrate_or_ceiling(&benign, &adversarial, policy, ModelKind::Identification),
    };
    Ok(IdentificationSummary {
        accuracy_before: model.accuracy(benign_rows, labels)?,
        accuracy_after: model.accuracy(adversarial_rows, labels)?,
        gate: gate_stats(model, adversarial_rows, labels, threshold)?,
        benign,
        adversarial,
        threshold,
        calibrated,
    })
}

/// One identification model attacked on its held-out windows.
#[derive(Debug, Clone)]
pub struct IdentificationRun {
    pub setup: IdentificationSetup,
    pub attack: DatasetAttack,
    pub adversarial_rows: Vec<Vec<f64>>,
    pub summary: IdentificationSummary,
}

pub fn run_identification(dataset: &Dataset, activity: ActivityCode, mask: SensorMask, cfg: &ExperimentConfig) -> Result<IdentificationRun> {
    let setup = prepare_identification(dataset, activity, mask, cfg)?;
    let (attack, adversarial_rows) = attack_identification(&setup, cfg)?;
    let benign: Vec<&[f64]> = setup.test_rows.iter().map(Vec::as_slice).collect();
    let adv: Vec<&[f64]> = adversarial_rows.iter().map(Vec::as_slice).collect();
    let summary = summarize_identification(&setup.model, &benign, &adv, &setup.test_labels, cfg.policy, None)?;
    Ok(IdentificationRun { setup, attack, adversarial_rows, summary })
}

#[derive(Debug, Clone)]
pub struct AuthenticationSetup {
    pub split: AuthSplit,
    pub model: DecisionForest,
    pub scaler: FeatureScaler,
}

pub fn prepare_authentication(
    dataset: &Dataset,
    subject: u32,
    activity: ActivityCode,
    mask: SensorMask,
    cfg: &ExperimentConfig,
) -> Result<AuthenticationSetup> {
    let split = build_auth_split(dataset, subject, activity, mask, cfg.seed)?;
    let model = train_authentication(&split, &cfg.forest, seed::derive(auth_seed(cfg, subject, activity, mask), &[1]))?;
    let scaler = FeatureScaler::fit(&split.train.row_refs())?;
    Ok(AuthenticationSetup { split, model, scaler })
}

/// Attacks the test windows of an authentication model. `test_rows` and
/// `labels` are the genuine/imposter test set.
pub fn attack_authentication(
    model: &DecisionForest,
    scaler: &FeatureScaler,
    key: (u32, ActivityCode, SensorMask),
    test_rows: &[&[f64]],
    labels: &[u32],
    cfg: &ExperimentConfig,
) -> Result<(DatasetAttack, Vec<Vec<f64>>)> {
    let attack_cfg = AttackConfig {
        seed: seed::derive(auth_seed(cfg, key.0, key.1, key.2), &[2]),
        ..cfg.attack.clone()
    };
    attack_in_normalized_space(model, scaler, test_rows, labels, &attack_cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthenticationSummary {
    pub benign_eer: f64,
    pub adversarial_eer: f64,
    pub benign: ProbabilityStats,
    pub adversarial: ProbabilityStats,
    /// Predicted-class probability of perturbed windows the model got wrong.
    pub adversarial_misclassified: Option<ProbabilityStats>,
    pub threshold: f64,
    pub calibrated: bool,
}

/// EERs and probability statistics of an authentication model. `labels`
/// are genuine/imposter labels shared by both row sets.
pub fn summarize_authentication(
    model: &DecisionForest,
    benign_rows: &[&[f64]],
    adversarial_rows: &[&[f64]],
    labels: &[u32],
    policy: ThresholdPolicy,
) -> Result<AuthenticationSummary> {
    let is_genuine: Vec<bool> = labels.iter().map(|&l| l == GENUINE).collect();
    let eer_of = |rows: &[&[f64]]| -> Result<f64> {
        let scores = genuine_scores(model, rows)?;
        let pairs: Vec<(f64, bool)> = scores.into_iter().zip(is_genuine.iter().copied()).collect();
        Ok(roc_and_eer(&pairs)?.1)
    };
    let probas = |rows: &[&[f64]]| rows.iter().map(|x| model.predict_proba(x)).collect::<Result<Vec<_>>>();
    let benign = ProbabilityStats::from_probabilities(&probas(benign_rows)?, Condition::Benign)?;
    let adv_probas = probas(adversarial_rows)?;
    let adversarial = ProbabilityStats::from_probabilities(&adv_probas, Condition::Adversarial)?;
    let wrong: Vec<ProbabilityVector> = adv_probas
        .iter()
        .zip(labels)
        .filter(|(p, &l)| model.classes[p.argmax()] != l)
        .map(|(p, _)| p.clone())
        .collect();
    let (threshold, calibrated) = calibrate_or_ceiling(&benign, &adversarial, policy, ModelKind::Authentication);
    Ok(AuthenticationSummary {
        benign_eer: eer_of(benign_rows)?,
        adversarial_eer: eer_of(adversarial_rows)?,
        adversarial_misclassified: ProbabilityStats::from_probabilities(&wrong, Condition::Adversarial).ok(),
        benign,
        adversarial,
        threshold,
        calibrated,
    })
}

/// One subject's authentication model, scored on benign and attacked test
/// windows.
#[derive(Debug, Clone)]
pub struct AuthenticationRun {
    pub setup: AuthenticationSetup,
    pub adversarial_rows: Vec<Vec<f64>>,
    pub summary: AuthenticationSummary,
}

impl AuthenticationRun {
    pub fn eer_entries(&self) -> [EerEntry; 2] {
        let split = &self.setup.split;
        let entry = |condition, eer| EerEntry {
            subject: split.subject,
            activity: split.activity,
            mask: split.mask,
            condition,
            eer,
        };
        [
            entry(Condition::Benign, self.summary.benign_eer),
            entry(Condition::Adversarial, self.summary.adversarial_eer),
        ]
    }
}

pub fn run_authentication(
    dataset: &Dataset,
    subject: u32,
    activity: ActivityCode,
    mask: SensorMask,
    cfg: &ExperimentConfig,
) -> Result<AuthenticationRun> {
    let setup = prepare_authentication(dataset, subject, activity, mask, cfg)?;
    let test_rows = setup.split.test.row_refs();
    let labels = &setup.split.test.labels;
    let (_, adversarial_rows) =
        attack_authentication(&setup.model, &setup.scaler, (subject, activity, mask), &test_rows, labels, cfg)?;
    let adv: Vec<&[f64]> = adversarial_rows.iter().map(Vec::as_slice).collect();
    let summary = summarize_authentication(&setup.model, &test_rows, &adv, labels, cfg.policy)?;
    Ok(AuthenticationRun { setup, adversarial_rows, summary })
}

/// Subjects with enough windows for an authentication model.
pub fn eligible_subjects(dataset: &Dataset, activity: ActivityCode, mask: SensorMask) -> Vec<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for v in dataset.slice(activity, mask) {
        *counts.entry(v.subject).or_default() += 1;
    }
    if counts.len() < 3 {
        return Vec::new();
    }
    counts
        .into_iter()
        .filter(|&(_, n)| n >= MIN_GENUINE_WINDOWS)
        .map(|(s, _)| s)
        .collect()
}

/// Authentication runs for every eligible subject, keyed by subject.
pub fn run_authentication_all(
    dataset: &Dataset,
    activity: ActivityCode,
    mask: SensorMask,
    cfg: &ExperimentConfig,
) -> Result<BTreeMap<u32, AuthenticationRun>> {
    eligible_subjects(dataset, activity, mask)
        .par_iter()
        .map(|&s| run_authentication(dataset, s, activity, mask, cfg).map(|r| (s, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_generate, SynthConfig};

    #[test]
    fn holdout_is_a_stratified_partition() {
        let labels: Vec<u32> = (0..50).map(|i| i % 5).collect();
        let (train, test) = holdout_split(&labels, 0.3, 1).unwrap();
        assert_eq!(train.len() + test.len(), 50);
        assert_eq!(test.len(), 15);
        for c in 0..5 {
            assert_eq!(test.iter().filter(|&&i| labels[i] == c).count(), 3);
        }
        assert_eq!(holdout_split(&labels, 0.3, 1).unwrap(), (train, test));
        assert!(matches!(holdout_split(&[1, 2, 2], 0.3, 0), Err(Error::Stratification { .. })));
    }

    #[test]
    fn small_identification_run() {
        let ds = synth_generate(&SynthConfig::new(4, 20, 6, 4.0, 12)).unwrap();
        let mut cfg = ExperimentConfig::new(3);
        cfg.forest.n_trees = 20;
        cfg.attack.max_iters = 40;
        let run = run_identification(&ds, ActivityCode::WALKING, SensorMask::PHONE_ACCEL, &cfg).unwrap();
        assert_eq!(run.adversarial_rows.len(), run.setup.test_labels.len());
        assert!(run.attack.accuracy_after <= run.attack.accuracy_before);
        assert_eq!(run.summary.accuracy_after, run.attack.accuracy_after);
        assert!(run.summary.gate.misclassified_above_threshold <= run.summary.gate.misclassified);
        assert!(run.summary.threshold >= 0.25 && run.summary.threshold <= THRESHOLD_CEILING);
        for (row, orig) in run.adversarial_rows.iter().zip(&run.setup.test_rows) {
            assert_eq!(row.len(), orig.len());
        }
    }
}
