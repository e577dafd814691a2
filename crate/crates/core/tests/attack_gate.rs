use motioncred::activity::{ActivityCode, SensorMask};
use motioncred::attack::{zoo_attack, AttackConfig, FeatureScaler};
use motioncred::authentication::{build_auth_split, genuine_scores, roc_and_eer, train_authentication, GENUINE};
use motioncred::experiment::{run_authentication_all, run_identification, ExperimentConfig};
use motioncred::forest::{DecisionForest, ForestParams, ProbabilityVector};
use motioncred::gate::{gate_stats, ModelStore, ThresholdTable};
use motioncred::ingest::{synth_generate, Dataset, FeatureVector, SynthConfig};
use motioncred::{verify, VerificationOutcome};

/// Class is the sign of the first feature; the other two are noise shared
/// by both classes.
fn toy_forest() -> (DecisionForest, Vec<Vec<f64>>) {
    let xs: Vec<Vec<f64>> = (0..60)
        .map(|i| vec![-2.95 + i as f64 * 0.1, (i % 7) as f64 * 0.3, (i % 5) as f64 * 0.2])
        .collect();
    let ys: Vec<u32> = xs.iter().map(|x| u32::from(x[0] > 0.0)).collect();
    let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let f = DecisionForest::train(&rows, &ys, &ForestParams { n_trees: 30, ..Default::default() }, 4).unwrap();
    (f, xs)
}

#[test]
fn attack_flips_toy_forest() {
    let (forest, xs) = toy_forest();
    let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let scaler = FeatureScaler::fit(&rows).unwrap();
    let victim = |z: &[f64]| -> ProbabilityVector { forest.predict_proba(&scaler.denormalize(z)).unwrap() };
    let start = [-1.5, 0.9, 0.4];
    assert!(forest.predict_proba(&start).unwrap().0[0] > 0.9);
    let x = scaler.normalize(&start);
    let cfg = AttackConfig { h: 0.5, clip: vec![(-10.0, 10.0); 3], ..Default::default() };
    let res = zoo_attack(&victim, &x, 0, &cfg).unwrap();
    assert!(res.success);
    // Check the flip directly rather than trusting the attack's own flag.
    let p = forest.predict_proba(&scaler.denormalize(&res.perturbed)).unwrap();
    assert_eq!(p.argmax(), 1);
    assert!(res.queries <= 2 * cfg.coords_per_iter.min(3) * res.iterations_used + res.iterations_used + 1);
}

#[test]
fn zero_budget_leaves_point_unchanged() {
    let (forest, _) = toy_forest();
    let victim = |x: &[f64]| forest.predict_proba(x).unwrap();
    let x = [-1.5, 0.9, 0.4];
    let cfg = AttackConfig { clip: x.iter().map(|&v| (v, v)).collect(), max_iters: 20, ..Default::default() };
    let res = zoo_attack(&victim, &x, 0, &cfg).unwrap();
    assert_eq!(res.perturbed, x.to_vec());
    assert!(!res.success);
}

fn auth_eer(ds: &Dataset, subject: u32) -> f64 {
    let split = build_auth_split(ds, subject, ActivityCode::WALKING, SensorMask::PHONE_ACCEL, 3).unwrap();
    let model = train_authentication(&split, &ForestParams { n_trees: 50, ..Default::default() }, 8).unwrap();
    let scores = genuine_scores(&model, &split.test.row_refs()).unwrap();
    let pairs: Vec<(f64, bool)> = scores.into_iter().zip(split.test.labels.iter().map(|&l| l == GENUINE)).collect();
    roc_and_eer(&pairs).unwrap().1
}

#[test]
fn authentication_eer_extremes() {
    let separated = synth_generate(&SynthConfig::new(10, 40, 6, 10.0, 21)).unwrap();
    assert!(auth_eer(&separated, 1602) <= 0.01);

    // Zero separation: every subject draws from the same distribution.
    let same = synth_generate(&SynthConfig::new(10, 200, 6, 1e-9, 21)).unwrap();
    let mean = (1600..1606).map(|s| auth_eer(&same, s)).sum::<f64>() / 6.0;
    assert!((mean - 0.5).abs() <= 0.1, "mean EER {mean}");
}

fn pipeline() -> (Dataset, ExperimentConfig) {
    let ds = synth_generate(&SynthConfig::new(6, 30, 8, 6.0, 5)).unwrap();
    let mut cfg = ExperimentConfig::new(9);
    cfg.forest.n_trees = 40;
    cfg.attack.max_iters = 60;
    (ds, cfg)
}

#[test]
fn gate_sweeps_are_monotone_and_traces_replay() {
    let (ds, cfg) = pipeline();
    let (a, m) = (ActivityCode::WALKING, SensorMask::PHONE_ACCEL);
    let id = run_identification(&ds, a, m, &cfg).unwrap();
    let auth = run_authentication_all(&ds, a, m, &cfg).unwrap();
    let mut store = ModelStore::default();
    store.id.insert((a, m), id.setup.model.clone());
    let mut base = ThresholdTable::default();
    for (&s, r) in &auth {
        store.auth.insert((s, a, m), r.setup.model.clone());
        base.auth.insert((s, a, m), r.summary.threshold);
    }
    let samples: Vec<FeatureVector> = id
        .setup
        .test_rows
        .iter()
        .chain(&id.adversarial_rows)
        .zip(id.setup.test_labels.iter().chain(&id.setup.test_labels))
        .map(|(x, &s)| FeatureVector { subject: s, activity: a, sensor_mask: m, window_index: 0, values: x.clone() })
        .collect();

    let run = |id_tau: f64, auth_tau: Option<f64>| -> Vec<VerificationOutcome> {
        let mut t = base.clone();
        t.id.insert((a, m), id_tau);
        if let Some(tau) = auth_tau {
            t.auth.values_mut().for_each(|v| *v = tau);
        }
        samples
            .iter()
            .map(|x| {
                let d = verify(x, x.subject, &store, &t).unwrap();
                assert_eq!(d.trace.replay(), d.outcome);
                if d.outcome == VerificationOutcome::Verified {
                    assert_eq!(d.trace.predicted_subject, x.subject);
                    assert!(d.trace.id_probability >= id_tau);
                }
                d.outcome
            })
            .collect()
    };
    let never_unlocks = |prev: &[VerificationOutcome], next: &[VerificationOutcome]| {
        prev.iter()
            .zip(next)
            .all(|(p, n)| !(*p == VerificationOutcome::FallbackSecondFactor && *n == VerificationOutcome::Verified))
    };
    let taus: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    for w in taus.windows(2) {
        assert!(never_unlocks(&run(w[0], None), &run(w[1], None)));
        let (lo, hi) = (0.5 + w[0] / 2.0, 0.5 + w[1] / 2.0);
        assert!(never_unlocks(&run(id.summary.threshold, Some(lo)), &run(id.summary.threshold, Some(hi))));
    }
    let verified = run(0.0, Some(0.5)).iter().filter(|o| **o == VerificationOutcome::Verified).count();
    assert!(verified > 0);

    let adv: Vec<&[f64]> = id.adversarial_rows.iter().map(Vec::as_slice).collect();
    let g = gate_stats(&id.setup.model, &adv, &id.setup.test_labels, 1.0).unwrap();
    assert_eq!(g.misclassified_above_threshold, 0);
}

#[test]
fn claimed_identity_mismatch_falls_back() {
    let (ds, cfg) = pipeline();
    let (a, m) = (ActivityCode::WALKING, SensorMask::PHONE_ACCEL);
    let id = run_identification(&ds, a, m, &cfg).unwrap();
    let auth = run_authentication_all(&ds, a, m, &cfg).unwrap();
    let mut store = ModelStore::default();
    store.id.insert((a, m), id.setup.model.clone());
    let mut table = ThresholdTable::default();
    table.id.insert((a, m), 0.0);
    for (&s, r) in &auth {
        store.auth.insert((s, a, m), r.setup.model.clone());
        table.auth.insert((s, a, m), r.summary.threshold);
    }
    let x = FeatureVector { subject: id.setup.test_labels[0], activity: a, sensor_mask: m, window_index: 0, values: id.setup.test_rows[0].clone() };
    let other = *auth.keys().find(|&&s| s != x.subject).unwrap();
    let d = verify(&x, other, &store, &table).unwrap();
    assert_eq!(d.outcome, VerificationOutcome::FallbackSecondFactor);
    assert_eq!(d.trace.step_reached, 1);
    assert!(d.trace.auth_probability.is_none());
}
