//! Per-activity multi-class subject identification.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::{ActivityCode, SensorMask};
use crate::error::{Error, Result};
use crate::forest::{stratified_folds, DecisionForest, ForestParams};
use crate::ingest::{Dataset, FeatureVector};
use crate::seed;
use crate::stats::{Condition, ProbabilityStats};

pub type IdentificationModelSet = BTreeMap<(ActivityCode, SensorMask), DecisionForest>;

/// Rows of one activity/mask slice with subject labels.
pub struct Slice<'a> {
    pub rows: Vec<&'a [f64]>,
    pub labels: Vec<u32>,
}

impl<'a> Slice<'a> {
    pub fn from_vectors(vectors: &[&'a FeatureVector]) -> Self {
        Self {
            rows: vectors.iter().map(|v| v.values.as_slice()).collect(),
            labels: vectors.iter().map(|v| v.subject).collect(),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Slice<'a> {
        Slice {
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Windows of the activity under `mask`, keeping only subjects with at least
/// `min_per_subject` windows.
pub fn activity_slice<'a>(dataset: &'a Dataset, activity: ActivityCode, mask: SensorMask, min_per_subject: usize) -> Result<Vec<&'a FeatureVector>> {
    let all = dataset.slice(activity, mask);
    if all.is_empty() {
        return Err(Error::EmptySlice(format!("activity {activity} mask {mask}")));
    }
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for v in &all {
        *counts.entry(v.subject).or_default() += 1;
    }
    Ok(all
        .into_iter()
        .filter(|v| counts[&v.subject] >= min_per_subject)
        .collect())
}

pub fn train_identification(
    dataset: &Dataset,
    activity: ActivityCode,
    mask: SensorMask,
    params: &ForestParams,
    seed: u64,
) -> Result<DecisionForest> {
    let vectors = activity_slice(dataset, activity, mask, 1)?;
    let slice = Slice::from_vectors(&vectors);
    let subjects: BTreeSet<u32> = slice.labels.iter().copied().collect();
    if subjects.len() < 2 {
        return Err(Error::Training(format!(
            "identification for activity {activity} needs at least two subjects"
        )));
    }
    DecisionForest::train(&slice.rows, &slice.labels, params, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
}

/// Stratified k-fold accuracy: train on k−1 folds, test on the rest.
pub fn cross_validate(slice: &Slice<'_>, k: usize, params: &ForestParams, seed: u64) -> Result<CrossValidation> {
    let folds = stratified_folds(&slice.labels, k, seed)?;
    let fold_accuracies = (0..k)
        .map(|f| {
            let (train, test) = folds.split(f);
            let (train, test) = (slice.subset(&train), slice.subset(&test));
            let forest = DecisionForest::train(&train.rows, &train.labels, params, seed::derive(seed, &[f as u64]))?;
            forest.accuracy(&test.rows, &test.labels)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CrossValidation { fold_accuracies, mean })
}

/// Cross-validated accuracy per (activity, mask) plus per-mask averages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub cells: BTreeMap<(ActivityCode, SensorMask), CrossValidation>,
}

impl AccuracyTable {
    pub fn get(&self, activity: ActivityCode, mask: SensorMask) -> Option<f64> {
        self.cells.get(&(activity, mask)).map(|c| c.mean)
    }

    pub fn masks(&self) -> BTreeSet<SensorMask> {
        self.cells.keys().map(|k| k.1).collect()
    }

    /// Mean over the activities present for `mask`.
    pub fn average(&self, mask: SensorMask) -> Option<f64> {
        let vals: Vec<f64> = self
            .cells
            .iter()
            .filter(|(k, _)| k.1 == mask)
            .map(|(_, c)| c.mean)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Rows A–S then `Avg`; one column per mask.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let masks: Vec<SensorMask> = self.masks().into_iter().collect();
        let header: Vec<String> = masks.iter().map(|m| m.label()).collect();
        writeln!(w, "activity,{}", header.join(","))?;
        let activities: BTreeSet<ActivityCode> = self.cells.keys().map(|k| k.0).collect();
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
        for a in activities {
            let row: Vec<String> = masks.iter().map(|&m| fmt(self.get(a, m))).collect();
            writeln!(w, "{a},{}", row.join(","))?;
        }
        let avg: Vec<String> = masks.iter().map(|&m| fmt(self.average(m))).collect();
        writeln!(w, "Avg,{}", avg.join(","))?;
        Ok(())
    }
}

/// Runs [`cross_validate`] for every requested (activity, mask) cell.
/// Subjects with fewer than `k` windows for an activity are left out of that
/// cell.
pub fn evaluate_identification(
    dataset: &Dataset,
    activities: &[ActivityCode],
    masks: &[SensorMask],
    k: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<AccuracyTable> {
    let views = masks
        .iter()
        .map(|&m| dataset.with_mask(m).map(|d| (m, d)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let keys: Vec<(ActivityCode, SensorMask)> = masks
        .iter()
        .flat_map(|&m| activities.iter().map(move |&a| (a, m)))
        .collect();
    let cells = keys
        .par_iter()
        .map(|&(a, m)| {
            let vectors = activity_slice(&views[&m], a, m, k)?;
            let slice = Slice::from_vectors(&vectors);
            let cell_seed = seed::derive(seed, &[a.code() as u64]);
            cross_validate(&slice, k, params, cell_seed).map(|cv| ((a, m), cv))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(AccuracyTable { cells })
}

/// Top-1 probability statistics of `model` over `samples`.
pub fn probability_stats(model: &DecisionForest, samples: &[&[f64]], condition: Condition) -> Result<ProbabilityStats> {
    let probas = samples
        .iter()
        .map(|x| model.predict_proba(x))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityStats::from_probabilities(&probas, condition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_generate, SynthConfig};

    fn small_params() -> ForestParams {
        ForestParams { n_trees: 20, ..Default::default() }
    }

    #[test]
    fn one_subject_is_an_error() {
        let ds = synth_generate(&SynthConfig::new(2, 12, 4, 6.0, 1)).unwrap();
        let only: Vec<_> = ds.rows.iter().filter(|r| r.subject == 1600).cloned().collect();
        let ds1 = Dataset::new(ds.columns.clone(), only).unwrap();
        let err = train_identification(&ds1, ActivityCode::WALKING, SensorMask::PHONE_ACCEL, &small_params(), 0);
        assert!(matches!(err, Err(Error::Training(_))));
        let err = train_identification(&ds, ActivityCode::JOGGING, SensorMask::PHONE_ACCEL, &small_params(), 0);
        assert!(matches!(err, Err(Error::EmptySlice(_))));
    }

    #[test]
    fn constant_predictor_accuracy_is_prevalence() {
        // A forest trained on uninformative features with a 3:1 class ratio
        // and depth 0 predicts the majority everywhere.
        let xs: Vec<Vec<f64>> = (0..40).map(|_| vec![0.0]).collect();
        let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<u32> = (0..40).map(|i| if i < 30 { 1600 } else { 1601 }).collect();
        let p = ForestParams { n_trees: 5, max_depth: Some(0), bootstrap: false, ..Default::default() };
        let f = DecisionForest::train(&rows, &labels, &p, 0).unwrap();
        assert_eq!(f.accuracy(&rows, &labels).unwrap(), 0.75);
    }

    #[test]
    fn table_average_and_csv() {
        let ds = synth_generate(&SynthConfig {
            activities: vec![ActivityCode::WALKING, ActivityCode::TYPING],
            ..SynthConfig::new(4, 10, 5, 8.0, 3)
        })
        .unwrap();
        let table = evaluate_identification(
            &ds,
            &[ActivityCode::WALKING, ActivityCode::TYPING],
            &[SensorMask::PHONE_ACCEL],
            5,
            &small_params(),
            11,
        )
        .unwrap();
        let m = SensorMask::PHONE_ACCEL;
        for cv in table.cells.values() {
            assert!(cv.fold_accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
            let mean = cv.fold_accuracies.iter().sum::<f64>() / cv.fold_accuracies.len() as f64;
            assert_eq!(cv.mean, mean);
        }
        let avg = (table.get(ActivityCode::WALKING, m).unwrap() + table.get(ActivityCode::TYPING, m).unwrap()) / 2.0;
        assert_eq!(table.average(m), Some(avg));
        let mut out = Vec::new();
        table.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "activity,phone-accel");
        assert!(lines[1].starts_with("A,"));
        assert!(lines[3].starts_with("Avg,"));
        assert_eq!(lines[1].split(',').nth(1).unwrap().split('.').nth(1).unwrap().len(), 4);
    }

    #[test]
    fn stats_top1_at_least_chance() {
        let ds = synth_generate(&SynthConfig::new(5, 12, 4, 2.0, 8)).unwrap();
        let f = train_identification(&ds, ActivityCode::WALKING, SensorMask::PHONE_ACCEL, &small_params(), 1).unwrap();
        let rows: Vec<&[f64]> = ds.rows.iter().map(|r| r.values.as_slice()).collect();
        let s = probability_stats(&f, &rows, Condition::Benign).unwrap();
        assert!(s.values.iter().all(|&p| p >= 1.0 / 5.0));
        assert_eq!(s.histogram.iter().sum::<usize>(), rows.len());
    }
}
