//! Per-user genuine-vs-imposter models, imposter-disjoint splits, ROC and EER.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::activity::{ActivityCode, SensorMask};
use crate::error::{Error, Result};
use crate::forest::{DecisionForest, ForestParams};
use crate::gate::ProbabilisticModel;
use crate::ingest::Dataset;
use crate::seed;
use crate::stats::{Condition, ProbabilityStats};

pub const GENUINE: u32 = 1;
pub const IMPOSTER: u32 = 0;

pub const MIN_GENUINE_WINDOWS: usize = 10;
pub const GENUINE_TRAIN_FRACTION: f64 = 0.7;

pub type AuthenticationModelSet = BTreeMap<(u32, ActivityCode, SensorMask), DecisionForest>;

/// Labeled rows; `sources[i]` is the subject that produced `rows[i]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub sources: Vec<u32>,
}

impl LabeledSet {
    fn push(&mut self, row: &[f64], label: u32, source: u32) {
        self.rows.push(row.to_vec());
        self.labels.push(label);
        self.sources.push(source);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_refs(&self) -> Vec<&[f64]> {
        self.rows.iter().map(Vec::as_slice).collect()
    }

    pub fn count(&self, label: u32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Distinct subjects behind the imposter rows.
    pub fn imposter_sources(&self) -> BTreeSet<u32> {
        self.labels
            .iter()
            .zip(&self.sources)
            .filter(|(&l, _)| l == IMPOSTER)
            .map(|(_, &s)| s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthSplit {
    pub subject: u32,
    pub activity: ActivityCode,
    pub mask: SensorMask,
    pub train: LabeledSet,
    pub test: LabeledSet,
    pub train_imposter_ids: BTreeSet<u32>,
    pub test_imposter_ids: BTreeSet<u32>,
}

/// Splits the subject's windows 70/30, partitions the other subjects into
/// two halves by seeded shuffle, and draws imposters for train and test
/// from different halves, downsampled to the genuine counts.
///
/// When an imposter pool is smaller than its genuine side, the genuine side
/// is downsampled instead so the classes stay balanced.
pub fn build_auth_split(dataset: &Dataset, subject: u32, activity: ActivityCode, mask: SensorMask, seed: u64) -> Result<AuthSplit> {
    let slice = dataset.slice(activity, mask);
    let mut genuine: Vec<&[f64]> = slice
        .iter()
        .filter(|v| v.subject == subject)
        .map(|v| v.values.as_slice())
        .collect();
    if genuine.len() < MIN_GENUINE_WINDOWS {
        return Err(Error::Split(format!(
            "subject {subject} has {} windows for activity {activity}, need {MIN_GENUINE_WINDOWS}",
            genuine.len()
        )));
    }
    let mut by_other: BTreeMap<u32, Vec<&[f64]>> = BTreeMap::new();
    for v in slice.iter().filter(|v| v.subject != subject) {
        by_other.entry(v.subject).or_default().push(&v.values);
    }
    if by_other.len() < 2 {
        return Err(Error::Split(format!(
            "activity {activity} has {} subjects besides {subject}, need 2",
            by_other.len()
        )));
    }

    let mut rng = seed::rng(seed, &[subject as u64, activity.code() as u64, mask.bits() as u64]);
    genuine.shuffle(&mut rng);
    let n_train = (genuine.len() as f64 * GENUINE_TRAIN_FRACTION).round() as usize;
    let (genuine_train, genuine_test) = genuine.split_at(n_train);

    let mut ids: Vec<u32> = by_other.keys().copied().collect();
    ids.shuffle(&mut rng);
    let half = ids.len().div_ceil(2);
    let train_imposter_ids: BTreeSet<u32> = ids[..half].iter().copied().collect();
    let test_imposter_ids: BTreeSet<u32> = ids[half..].iter().copied().collect();

    let mut draw = |genuine: &[&[f64]], pool_ids: &BTreeSet<u32>| {
        let mut pool: Vec<(u32, &[f64])> = pool_ids
            .iter()
            .flat_map(|id| by_other[id].iter().map(move |r| (*id, *r)))
            .collect();
        pool.shuffle(&mut rng);
        let n = genuine.len().min(pool.len());
        let mut set = LabeledSet::default();
        for r in &genuine[..n] {
            set.push(r, GENUINE, subject);
        }
        for (id, r) in &pool[..n] {
            set.push(r, IMPOSTER, *id);
        }
        set
    };
    let train = draw(genuine_train, &train_imposter_ids);
    let test = draw(genuine_test, &test_imposter_ids);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split(format!("empty split for subject {subject}, activity {activity}")));
    }
    Ok(AuthSplit {
        subject,
        activity,
        mask,
        train,
        test,
        train_imposter_ids,
        test_imposter_ids,
    })
}

pub fn train_authentication(split: &AuthSplit, params: &ForestParams, seed: u64) -> Result<DecisionForest> {
    DecisionForest::train(&split.train.row_refs(), &split.train.labels, params, seed)
}

/// Genuine-class probability of each row.
pub fn genuine_scores(model: &dyn ProbabilisticModel, rows: &[&[f64]]) -> Result<Vec<f64>> {
    let g = model
        .classes()
        .iter()
        .position(|&c| c == GENUINE)
        .ok_or_else(|| Error::Training("authentication model lacks a genuine class".into()))?;
    rows.iter().map(|x| model.predict_proba(x).map(|p| p.0[g])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Operating points sorted by threshold; a sample is accepted when its
/// score is at least the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "threshold,far,frr")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.threshold, p.far, p.frr)?;
        }
        Ok(())
    }
}

/// Threshold above every possible probability, where nothing is accepted.
pub const REJECT_ALL: f64 = 1.0 + f64::EPSILON;

/// Sweeps thresholds over the unique scores plus 0, 1 and [`REJECT_ALL`],
/// then interpolates linearly where FAR − FRR changes sign.
///
/// `scores` holds `(genuine_probability, is_genuine)` pairs.
pub fn roc_and_eer(scores: &[(f64, bool)]) -> Result<(RocCurve, f64)> {
    let n_gen = scores.iter().filter(|s| s.1).count();
    let n_imp = scores.len() - n_gen;
    if n_gen == 0 || n_imp == 0 {
        return Err(Error::OneClass);
    }
    if let Some(s) = scores.iter().find(|s| !s.0.is_finite()) {
        return Err(Error::Parse(format!("non-finite score {}", s.0)));
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut thresholds: Vec<f64> = sorted.iter().map(|s| s.0).chain([0.0, 1.0, REJECT_ALL]).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    // Scores below the threshold are rejected; walk both lists together.
    let mut points = Vec::with_capacity(thresholds.len());
    let (mut i, mut rejected_gen, mut rejected_imp) = (0, 0usize, 0usize);
    for &t in &thresholds {
        while i < sorted.len() && sorted[i].0 < t {
            if sorted[i].1 {
                rejected_gen += 1;
            } else {
                rejected_imp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            far: (n_imp - rejected_imp) as f64 / n_imp as f64,
            frr: rejected_gen as f64 / n_gen as f64,
        });
    }
    let eer = eer_from_points(&points);
    Ok((RocCurve { points }, eer))
}

fn eer_from_points(points: &[RocPoint]) -> f64 {
    let diff = |p: &RocPoint| p.far - p.frr;
    let k = points
        .iter()
        .position(|p| diff(p) <= 0.0)
        .expect("the reject-all point has FAR − FRR = −1");
    let (b, db) = (points[k], diff(&points[k]));
    if db == 0.0 || k == 0 {
        return b.far;
    }
    let (a, da) = (points[k - 1], diff(&points[k - 1]));
    let t = da / (da - db);
    a.far + t * (b.far - a.far)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerEntry {
    pub subject: u32,
    pub activity: ActivityCode,
    pub mask: SensorMask,
    pub condition: Condition,
    pub eer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerSummary {
    pub mean: f64,
    pub std: f64,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EerReport {
    pub entries: Vec<EerEntry>,
}

impl EerReport {
    /// Mean and population std over subjects, per activity and condition.
    pub fn summary(&self) -> BTreeMap<(ActivityCode, Condition), EerSummary> {
        let mut groups: BTreeMap<(ActivityCode, Condition), Vec<f64>> = BTreeMap::new();
        for e in &self.entries {
            groups.entry((e.activity, e.condition)).or_default().push(e.eer);
        }
        groups
            .into_iter()
            .map(|(k, v)| {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                (k, EerSummary { mean, std, n_subjects: v.len() })
            })
            .collect()
    }

    pub fn mean(&self, activity: ActivityCode, condition: Condition) -> Option<f64> {
        self.summary().get(&(activity, condition)).map(|s| s.mean)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "activity,condition,mean_eer,std_eer,n_subjects")?;
        for ((a, c), s) in self.summary() {
            writeln!(w, "{a},{},{:.4},{:.4},{}", c.name(), s.mean, s.std, s.n_subjects)?;
        }
        Ok(())
    }
}

/// Predicted-class probability statistics of a binary model. Its floor is
/// 0.5 because the predicted class is the larger of two.
pub fn auth_probability_stats(model: &dyn ProbabilisticModel, samples: &[&[f64]], condition: Condition) -> Result<ProbabilityStats> {
    let probas = samples
        .iter()
        .map(|x| model.predict_proba(x))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityStats::from_probabilities(&probas, condition)
}
