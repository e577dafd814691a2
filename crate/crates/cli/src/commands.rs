//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use motioncred::activity::SensorSource;
use motioncred::authentication::{EerEntry, EerReport, GENUINE, IMPOSTER};
use motioncred::experiment::{
    attack_authentication, attack_identification, eligible_subjects, prepare_authentication, prepare_identification,
    summarize_authentication, summarize_identification, AuthenticationSummary, IdentificationSetup,
    IdentificationSummary,
};
use motioncred::identification::evaluate_identification;
use motioncred::ingest::parse::format_reading;
use motioncred::ingest::{discover_raw_files, ingest_files, synth_raw, RawSynthConfig, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_WINDOW_SECONDS};
use motioncred::stats::{Condition, ProbabilityStats};
use motioncred::{verify as verify_sample, ActivityCode, Dataset, FeatureVector, SensorMask, ThresholdTable, VerificationOutcome};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::layout::{load_model, load_scaler, save_model, save_scaler, write_sidecar, Layout, ModelKey};
use crate::plot::{density_panels, paired_by_activity, PairedSeries};
use crate::report::{create, write_gate_stats, write_probability_stats, StatsRow};

/// Raw files named directly or found under directories.
fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(discover_raw_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no raw sensor files found");
    }
    Ok(files)
}

/// A feature file, or a raw WISDM directory ingested with default windows.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        let files = expand_inputs(&[path.to_path_buf()])?;
        let (ds, summary) = ingest_files(&files, DEFAULT_WINDOW_SECONDS, DEFAULT_SAMPLE_RATE_HZ)?;
        if summary.malformed_lines > 0 {
            warn!("skipped {} malformed lines", summary.malformed_lines);
        }
        return Ok(ds);
    }
    Dataset::load(path).with_context(|| format!("loading features {}", path.display()))
}

pub fn ingest(inputs: &[PathBuf], output: &Path, window_seconds: f64, sample_rate_hz: f64) -> Result<()> {
    let files = expand_inputs(inputs)?;
    let (ds, summary) = ingest_files(&files, window_seconds, sample_rate_hz)?;
    if summary.malformed_lines > 0 {
        warn!("skipped {} malformed lines", summary.malformed_lines);
    }
    crate::layout::ensure_parent(output)?;
    ds.save(output)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "subject,activity,source,windows")?;
    for ((s, a, src), n) in &summary.window_counts {
        writeln!(out, "{s},{a},{src},{n}")?;
    }
    info!("wrote {} windows from {} files to {}", ds.len(), files.len(), output.display());
    Ok(())
}

/// Writes synthetic readings as `<dir>/<device>/<sensor>/data_<subject>_<sensor>_<device>.txt`.
pub fn synth(dir: &Path, cfg: &RawSynthConfig) -> Result<()> {
    let readings = synth_raw(cfg)?;
    let mut files: BTreeMap<(SensorSource, u32), Vec<String>> = BTreeMap::new();
    for r in &readings {
        files.entry((r.source, r.subject)).or_default().push(format_reading(r));
    }
    for ((source, subject), lines) in files {
        let (dev, kind) = source.name().split_once('-').context("source name")?;
        let sub = dir.join(dev).join(kind);
        fs::create_dir_all(&sub)?;
        let mut text = lines.join("\n");
        text.push('\n');
        fs::write(sub.join(format!("data_{subject}_{kind}_{dev}.txt")), text)?;
    }
    info!("wrote {} readings under {}", readings.len(), dir.display());
    Ok(())
}

fn holdout_dataset(activity: ActivityCode, mask: SensorMask, rows: &[Vec<f64>], subjects: &[u32]) -> Result<Dataset> {
    let vectors = rows
        .iter()
        .zip(subjects)
        .enumerate()
        .map(|(i, (values, &subject))| FeatureVector {
            subject,
            activity,
            sensor_mask: mask,
            window_index: i as u32,
            values: values.clone(),
        })
        .collect();
    Ok(Dataset::from_rows(vectors)?)
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(&cfg.data)?;
    let layout = Layout::new(&cfg.output_dir);
    let exp = &cfg.experiment;
    for &mask in &cfg.masks {
        let view = ds.with_mask(mask)?;
        let present = view.activities();
        for &activity in &cfg.activities {
            if !present.contains(&activity) {
                warn!("no {mask} windows for activity {activity}; skipped");
                continue;
            }
            let setup = prepare_identification(&view, activity, mask, exp)?;
            let key = ModelKey::Id(activity, mask);
            save_model(&layout.model(key), &setup.model)?;
            save_scaler(&layout.scaler(key), &setup.scaler)?;
            holdout_dataset(activity, mask, &setup.test_rows, &setup.test_labels)?.save_to(&layout.holdout(key))?;

            let subjects = eligible_subjects(&view, activity, mask);
            subjects
                .par_iter()
                .map(|&s| -> Result<()> {
                    let auth = prepare_authentication(&view, s, activity, mask, exp)?;
                    let key = ModelKey::Auth(s, activity, mask);
                    save_model(&layout.model(key), &auth.model)?;
                    save_scaler(&layout.scaler(key), &auth.scaler)?;
                    let test = &auth.split.test;
                    holdout_dataset(activity, mask, &test.rows, &test.sources)?.save_to(&layout.holdout(key))
                })
                .collect::<Result<Vec<()>>>()?;
            info!("trained {activity}/{mask}: identification plus {} authentication models", subjects.len());
        }
    }
    Ok(())
}

trait SaveTo {
    fn save_to(&self, path: &Path) -> Result<()>;
}

impl SaveTo for Dataset {
    fn save_to(&self, path: &Path) -> Result<()> {
        crate::layout::ensure_parent(path)?;
        self.save(path).with_context(|| format!("writing {}", path.display()))
    }
}

/// Saved models selected by the configured activities and masks.
fn selected_keys(cfg: &RunConfig, layout: &Layout) -> Result<Vec<ModelKey>> {
    let keys: Vec<ModelKey> = layout
        .model_keys()?
        .into_iter()
        .filter(|k| cfg.activities.contains(&k.activity()) && cfg.masks.contains(&k.mask()))
        .collect();
    if keys.is_empty() {
        bail!("no saved models match the configured activities and masks");
    }
    Ok(keys)
}

/// Rows and class labels of a holdout or adversarial file for `key`.
fn labeled_rows(path: &Path, key: ModelKey) -> Result<(Dataset, Vec<u32>)> {
    let ds = Dataset::load(path).with_context(|| format!("loading {}", path.display()))?;
    let labels = ds
        .rows
        .iter()
        .map(|r| match key {
            ModelKey::Id(..) => r.subject,
            ModelKey::Auth(s, ..) if r.subject == s => GENUINE,
            ModelKey::Auth(..) => IMPOSTER,
        })
        .collect();
    Ok((ds, labels))
}

fn refs(ds: &Dataset) -> Vec<&[f64]> {
    ds.rows.iter().map(|r| r.values.as_slice()).collect()
}

pub fn attack(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let keys = selected_keys(cfg, &layout)?;
    keys.par_iter()
        .map(|&key| -> Result<()> {
            let model = load_model(&layout.model(key))?;
            let scaler = load_scaler(&layout.scaler(key))?;
            let (holdout, labels) = labeled_rows(&layout.holdout(key), key)?;
            let (attack, adversarial) = match key {
                ModelKey::Id(activity, mask) => {
                    let setup = IdentificationSetup {
                        activity,
                        mask,
                        model,
                        scaler,
                        test_rows: holdout.rows.iter().map(|r| r.values.clone()).collect(),
                        test_labels: labels,
                    };
                    attack_identification(&setup, &cfg.experiment)?
                }
                ModelKey::Auth(s, a, m) => {
                    attack_authentication(&model, &scaler, (s, a, m), &refs(&holdout), &labels, &cfg.experiment)?
                }
            };
            let mut perturbed = holdout.clone();
            for (row, values) in perturbed.rows.iter_mut().zip(adversarial) {
                row.values = values;
            }
            perturbed.save_to(&layout.adversarial(key))?;
            write_sidecar(&layout.sidecar(key), &attack.results)?;
            info!(
                "attacked {}: accuracy {:.3} -> {:.3}",
                key.stem(),
                attack.accuracy_before,
                attack.accuracy_after
            );
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(())
}

enum Summary {
    Id(IdentificationSummary),
    Auth(AuthenticationSummary),
}

/// Scores one model on its benign and adversarial windows. Identification
/// models use `threshold` when given.
fn summarize(layout: &Layout, key: ModelKey, cfg: &RunConfig, threshold: Option<f64>) -> Result<Summary> {
    let model = load_model(&layout.model(key))?;
    let (benign, labels) = labeled_rows(&layout.holdout(key), key)?;
    let adv_path = layout.adversarial(key);
    if !adv_path.is_file() {
        bail!("missing {}; run `motioncred attack` first", adv_path.display());
    }
    let (adversarial, _) = labeled_rows(&adv_path, key)?;
    let policy = cfg.experiment.policy;
    Ok(match key {
        ModelKey::Id(..) => Summary::Id(summarize_identification(
            &model,
            &refs(&benign),
            &refs(&adversarial),
            &labels,
            policy,
            threshold,
        )?),
        ModelKey::Auth(..) => Summary::Auth(summarize_authentication(
            &model,
            &refs(&benign),
            &refs(&adversarial),
            &labels,
            policy,
        )?),
    })
}

fn summarize_all(layout: &Layout, keys: &[ModelKey], cfg: &RunConfig, table: Option<&ThresholdTable>) -> Result<Vec<(ModelKey, Summary)>> {
    keys.par_iter()
        .map(|&key| {
            let t = match (key, table) {
                (ModelKey::Id(a, m), Some(t)) => t.id.get(&(a, m)).copied(),
                _ => None,
            };
            summarize(layout, key, cfg, t).map(|s| (key, s))
        })
        .collect()
}

pub fn calibrate(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let keys = selected_keys(cfg, &layout)?;
    let mut table = ThresholdTable::default();
    for (key, summary) in summarize_all(&layout, &keys, cfg, None)? {
        let (threshold, calibrated) = match &summary {
            Summary::Id(s) => (s.threshold, s.calibrated),
            Summary::Auth(s) => (s.threshold, s.calibrated),
        };
        if !calibrated {
            warn!("{}: benign mean does not exceed adversarial mean; threshold set to the ceiling", key.stem());
        }
        match key {
            ModelKey::Id(a, m) => table.id.insert((a, m), threshold),
            ModelKey::Auth(s, a, m) => table.auth.insert((s, a, m), threshold),
        };
    }
    table.save(&layout.thresholds())?;
    info!("wrote {} thresholds to {}", table.id.len() + table.auth.len(), layout.thresholds().display());
    Ok(())
}

/// Probability values of every subject's model pooled into one sample.
fn pooled(stats: &[&ProbabilityStats], condition: Condition) -> Option<ProbabilityStats> {
    let values: Vec<f64> = stats.iter().flat_map(|s| s.values.iter().copied()).collect();
    ProbabilityStats::from_values(values, 2, condition).ok()
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let reports = layout.reports();
    let exp = &cfg.experiment;

    let ds = load_dataset(&cfg.data)?;
    let present = ds.activities();
    let activities: Vec<ActivityCode> = cfg.activities.iter().copied().filter(|a| present.contains(a)).collect();
    let accuracy = evaluate_identification(&ds, &activities, &cfg.masks, cfg.folds, &exp.forest, exp.seed)?;
    accuracy.write_csv(create(&reports.join("accuracy_table.csv"))?)?;

    let table = ThresholdTable::load(&layout.thresholds())
        .with_context(|| format!("loading {}; run `motioncred calibrate` first", layout.thresholds().display()))?;
    let keys = selected_keys(cfg, &layout)?;
    let summaries = summarize_all(&layout, &keys, cfg, Some(&table))?;

    let mut id_rows = Vec::new();
    let mut auth: BTreeMap<(ActivityCode, SensorMask), Vec<(u32, AuthenticationSummary)>> = BTreeMap::new();
    for (key, summary) in summaries {
        match (key, summary) {
            (ModelKey::Id(a, m), Summary::Id(s)) => id_rows.push((a, m, s)),
            (ModelKey::Auth(subject, a, m), Summary::Auth(s)) => auth.entry((a, m)).or_default().push((subject, s)),
            _ => unreachable!("summary kind follows key kind"),
        }
    }

    let mut stats = Vec::new();
    for (a, m, s) in &id_rows {
        for (condition, st) in [("benign", &s.benign), ("adversarial", &s.adversarial)] {
            stats.push(StatsRow { model: "identification", activity: *a, mask: *m, condition, stats: st.clone() });
        }
    }
    let mut auth_means = BTreeMap::new();
    for (&(a, m), runs) in &auth {
        let benign = pooled(&runs.iter().map(|r| &r.1.benign).collect::<Vec<_>>(), Condition::Benign);
        let adversarial = pooled(&runs.iter().map(|r| &r.1.adversarial).collect::<Vec<_>>(), Condition::Adversarial);
        let wrong = pooled(
            &runs.iter().filter_map(|r| r.1.adversarial_misclassified.as_ref()).collect::<Vec<_>>(),
            Condition::Adversarial,
        );
        for (condition, st) in [("benign", &benign), ("adversarial", &adversarial), ("adversarial_misclassified", &wrong)] {
            if let Some(st) = st {
                stats.push(StatsRow { model: "authentication", activity: a, mask: m, condition, stats: st.clone() });
            }
        }
        if let (Some(b), Some(w)) = (&benign, &wrong) {
            auth_means.insert((a, m), (b.mean, w.mean));
        }
    }
    write_probability_stats(&reports.join("probability_stats.csv"), &stats)?;
    write_gate_stats(&reports.join("gate_stats.csv"), &id_rows)?;

    // The headline mask gets the unsuffixed EER report and the figures.
    let headline = if cfg.masks.contains(&SensorMask::PHONE_ACCEL) { SensorMask::PHONE_ACCEL } else { cfg.masks[0] };
    let mut eer_reports: BTreeMap<SensorMask, EerReport> = BTreeMap::new();
    for (&(a, m), runs) in &auth {
        let report = eer_reports.entry(m).or_default();
        for (subject, s) in runs {
            for (condition, eer) in [(Condition::Benign, s.benign_eer), (Condition::Adversarial, s.adversarial_eer)] {
                report.entries.push(EerEntry { subject: *subject, activity: a, mask: m, condition, eer });
            }
        }
    }
    for (m, report) in &eer_reports {
        let name = if *m == headline { "eer_report.csv".to_string() } else { format!("eer_report_{}.csv", m.label()) };
        report.write_csv(create(&reports.join(name))?)?;
    }

    let id_of = |a: ActivityCode| id_rows.iter().find(|r| r.0 == a && r.1 == headline).map(|r| &r.2);
    let pairs = [
        ("fig2_walking_jogging.svg", [ActivityCode::WALKING, ActivityCode::JOGGING]),
        ("fig3_clapping_typing.svg", [ActivityCode::CLAPPING, ActivityCode::TYPING]),
        ("fig4_drinking_sandwich.svg", [ActivityCode::DRINKING, ActivityCode::SANDWICH]),
    ];
    for (file, acts) in pairs {
        let panels: Vec<_> = acts
            .iter()
            .filter_map(|&a| id_of(a).map(|s| (a, &s.benign, &s.adversarial)))
            .collect();
        if !panels.is_empty() {
            let title = format!("Identification probabilities ({})", headline.label());
            density_panels(&reports.join(file), &title, &panels)?;
        }
    }
    let error_points: Vec<_> = id_rows
        .iter()
        .filter(|r| r.1 == headline)
        .map(|(a, _, s)| (*a, 1.0 - s.accuracy_before, s.adversarial_error()))
        .collect();
    if !error_points.is_empty() {
        paired_by_activity(
            &reports.join("fig5_misclassification.svg"),
            &PairedSeries {
                title: "Identification misclassification error",
                y_desc: "error",
                names: ["benign", "adversarial"],
                points: error_points,
            },
        )?;
    }
    let prob_points: Vec<_> = auth_means
        .iter()
        .filter(|(k, _)| k.1 == headline)
        .map(|(k, &(b, w))| (k.0, b, w))
        .collect();
    if !prob_points.is_empty() {
        paired_by_activity(
            &reports.join("fig6_auth_probabilities.svg"),
            &PairedSeries {
                title: "Authentication mean prediction probability",
                y_desc: "probability",
                names: ["benign", "adversarial misclassified"],
                points: prob_points,
            },
        )?;
    }
    if let Some(report) = eer_reports.get(&headline) {
        let points: Vec<_> = report
            .summary()
            .into_iter()
            .filter(|((_, c), _)| *c == Condition::Benign)
            .filter_map(|((a, _), s)| report.mean(a, Condition::Adversarial).map(|adv| (a, s.mean, adv)))
            .collect();
        paired_by_activity(
            &reports.join("fig7_eer.svg"),
            &PairedSeries {
                title: "Authentication EER",
                y_desc: "EER",
                names: ["benign", "adversarial"],
                points,
            },
        )?;
    }
    info!("reports written to {}", reports.display());
    Ok(())
}

/// Verifies row `row` of `sample` as `claimed` and prints the trace.
pub fn verify(models: &Path, thresholds: Option<&Path>, sample: &Path, row: usize, claimed: u32) -> Result<VerificationOutcome> {
    let layout = Layout::new(models);
    let threshold_path = thresholds.map_or_else(|| layout.thresholds(), Path::to_path_buf);
    let table = ThresholdTable::load(&threshold_path).with_context(|| format!("loading {}", threshold_path.display()))?;
    let store = layout.load_store()?;
    let ds = Dataset::load(sample).with_context(|| format!("loading {}", sample.display()))?;
    let Some(window) = ds.rows.get(row) else {
        bail!("{} has {} rows; row {row} does not exist", sample.display(), ds.len());
    };
    let decision = verify_sample(window, claimed, &store, &table)?;
    let t = &decision.trace;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let mut out = std::io::stdout().lock();
    writeln!(out, "outcome={:?}", decision.outcome)?;
    writeln!(out, "claimed_subject={}", t.claimed_subject)?;
    writeln!(out, "predicted_subject={}", t.predicted_subject)?;
    writeln!(out, "id_probability={:.4}", t.id_probability)?;
    writeln!(out, "id_threshold={:.4}", t.id_threshold)?;
    writeln!(out, "auth_probability={}", opt(t.auth_probability))?;
    writeln!(out, "auth_threshold={}", opt(t.auth_threshold))?;
    writeln!(out, "step_reached={}", t.step_reached)?;
    Ok(decision.outcome)
}
