use std::collections::BTreeMap;

use motioncred::activity::{ActivityCode, SensorMask};
use motioncred::forest::{DecisionForest, ForestParams};
use motioncred::identification::evaluate_identification;
use motioncred::ingest::{synth_generate, Dataset, SynthConfig};
use rand::Rng;

fn rows(ds: &Dataset) -> (Vec<&[f64]>, Vec<u32>) {
    (
        ds.rows.iter().map(|r| r.values.as_slice()).collect(),
        ds.rows.iter().map(|r| r.subject).collect(),
    )
}

/// Leave-one-out nearest centroid: a classifier simple enough to trust,
/// used to confirm the synthetic clusters really are separable.
fn nearest_centroid_loo_accuracy(ds: &Dataset) -> f64 {
    let d = ds.dim();
    let mut sums: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    for r in &ds.rows {
        let e = sums.entry(r.subject).or_insert_with(|| (vec![0.0; d], 0));
        e.0.iter_mut().zip(&r.values).for_each(|(s, v)| *s += v);
        e.1 += 1;
    }
    let hits = ds
        .rows
        .iter()
        .filter(|r| {
            let best = sums
                .iter()
                .map(|(&s, (sum, n))| {
                    let (sum, n): (Vec<f64>, f64) = if s == r.subject {
                        (sum.iter().zip(&r.values).map(|(a, b)| a - b).collect(), (*n - 1) as f64)
                    } else {
                        (sum.clone(), *n as f64)
                    };
                    let dist: f64 = sum.iter().zip(&r.values).map(|(c, v)| (c / n - v).powi(2)).sum();
                    (dist, s)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap()
                .1;
            best == r.subject
        })
        .count();
    hits as f64 / ds.len() as f64
}

#[test]
fn synthetic_clusters_are_separable_and_learned() {
    let ds = synth_generate(&SynthConfig::new(5, 30, 8, 8.0, 41)).unwrap();
    assert_eq!(nearest_centroid_loo_accuracy(&ds), 1.0);
    let table = evaluate_identification(
        &ds,
        &[ActivityCode::WALKING],
        &[SensorMask::PHONE_ACCEL],
        10,
        &ForestParams { n_trees: 50, ..Default::default() },
        3,
    )
    .unwrap();
    assert!(table.get(ActivityCode::WALKING, SensorMask::PHONE_ACCEL).unwrap() >= 0.99);
}

#[test]
fn identical_across_thread_counts() {
    let ds = synth_generate(&SynthConfig::new(6, 25, 10, 2.0, 7)).unwrap();
    let (x, y) = rows(&ds);
    let params = ForestParams { n_trees: 32, ..Default::default() };
    let train = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| DecisionForest::train(&x, &y, &params, 99).unwrap())
    };
    let single = train(1);
    assert_eq!(single, train(8));
    assert_eq!(single, train(3));
}

#[test]
fn unrestricted_without_bootstrap_fits_training_data() {
    let ds = synth_generate(&SynthConfig::new(8, 20, 6, 0.5, 13)).unwrap();
    let (x, y) = rows(&ds);
    let params = ForestParams { n_trees: 10, bootstrap: false, ..Default::default() };
    let f = DecisionForest::train(&x, &y, &params, 1).unwrap();
    assert_eq!(f.accuracy(&x, &y).unwrap(), 1.0);
}

#[test]
fn probabilities_sum_to_one_on_random_inputs() {
    let ds = synth_generate(&SynthConfig::new(7, 15, 5, 3.0, 2)).unwrap();
    let (x, y) = rows(&ds);
    let f = DecisionForest::train(&x, &y, &ForestParams { n_trees: 25, ..Default::default() }, 5).unwrap();
    let mut rng = motioncred::seed::rng(17, &[]);
    for _ in 0..1000 {
        let q: Vec<f64> = (0..5).map(|_| rng.random_range(-30.0..30.0)).collect();
        let p = f.predict_proba(&q).unwrap();
        assert_eq!(p.len(), 7);
        assert!(p.0.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
