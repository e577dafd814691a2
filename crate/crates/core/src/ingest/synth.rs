//! Synthetic datasets for runs without the external corpus.
//!
//! [`synth_generate`] draws feature vectors directly from per-subject
//! isotropic Gaussians. [`synth_raw`] produces raw tri-axial readings from a
//! parametric periodic-motion model, so the whole ingest path can be
//! exercised end to end.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activity::{ActivityCode, SensorMask, SensorSource};
use crate::error::{Error, Result};
use crate::ingest::dataset::{generic_columns, Dataset};
use crate::ingest::features::FeatureVector;
use crate::ingest::parse::SensorReading;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_windows_per_subject: usize,
    pub feature_dim: usize,
    /// Minimum distance between subject means, in within-class standard
    /// deviations.
    pub cluster_separation: f64,
    pub seed: u64,
    #[serde(default = "default_activities")]
    pub activities: Vec<ActivityCode>,
    #[serde(default = "default_first_subject")]
    pub first_subject: u32,
}

fn default_activities() -> Vec<ActivityCode> {
    vec![ActivityCode::WALKING]
}

fn default_first_subject() -> u32 {
    1600
}

impl SynthConfig {
    pub fn new(n_subjects: usize, n_windows_per_subject: usize, feature_dim: usize, cluster_separation: f64, seed: u64) -> Self {
        Self {
            n_subjects,
            n_windows_per_subject,
            feature_dim,
            cluster_separation,
            seed,
            activities: default_activities(),
            first_subject: default_first_subject(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::Config("n_subjects must be at least 2".into()));
        }
        if !(self.cluster_separation > 0.0) {
            return Err(Error::Config("cluster_separation must be positive".into()));
        }
        if self.feature_dim == 0 || self.activities.is_empty() {
            return Err(Error::Config("feature_dim and activities must be non-empty".into()));
        }
        Ok(())
    }
}

fn separated_means(cfg: &SynthConfig, activity: ActivityCode) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(cfg.seed, &[0x6d65616e, activity.code() as u64]);
    let mut spread = cfg.cluster_separation;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_subjects);
    let mut attempts = 0;
    while means.len() < cfg.n_subjects {
        let cand: Vec<f64> = (0..cfg.feature_dim)
            .map(|_| spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let ok = means.iter().all(|m| {
            let d2: f64 = m.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() >= cfg.cluster_separation
        });
        if ok {
            means.push(cand);
        } else {
            attempts += 1;
            if attempts % 1000 == 0 {
                spread *= 1.5;
            }
        }
    }
    means
}

/// Feature vectors from per-subject isotropic Gaussians with unit
/// within-class standard deviation.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n_subjects * cfg.n_windows_per_subject * cfg.activities.len());
    for &activity in &cfg.activities {
        let means = separated_means(cfg, activity);
        for (s, mean) in means.iter().enumerate() {
            let subject = cfg.first_subject + s as u32;
            let mut rng = seed::rng(cfg.seed, &[activity.code() as u64, subject as u64]);
            for w in 0..cfg.n_windows_per_subject {
                let values = mean
                    .iter()
                    .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                rows.push(FeatureVector {
                    subject,
                    activity,
                    sensor_mask: SensorMask::PHONE_ACCEL,
                    window_index: w as u32,
                    values,
                });
            }
        }
    }
    Dataset::new(generic_columns(cfg.feature_dim), rows)
}

/// Parameters of the raw periodic-motion generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSynthConfig {
    pub n_subjects: usize,
    pub activities: Vec<ActivityCode>,
    pub mask: SensorMask,
    pub windows_per_activity: usize,
    pub sample_rate_hz: f64,
    pub window_seconds: f64,
    /// Scale of subject-specific deviation from the activity's prototype
    /// motion. Smaller is harder to tell apart.
    pub subject_spread: f64,
    /// Per-window jitter of frequency and amplitude.
    pub session_jitter: f64,
    /// Sample noise relative to motion amplitude.
    pub noise: f64,
    pub seed: u64,
    pub first_subject: u32,
}

impl Default for RawSynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 12,
            activities: ActivityCode::DISCUSSION.to_vec(),
            mask: SensorMask::ALL,
            windows_per_activity: 18,
            sample_rate_hz: 20.0,
            window_seconds: 10.0,
            subject_spread: 0.35,
            session_jitter: 0.08,
            noise: 0.25,
            seed: 1,
            first_subject: 1600,
        }
    }
}

#[derive(Clone)]
struct Motion {
    freq: f64,
    amp: [f64; 3],
    phase: [f64; 3],
    harmonic: [f64; 3],
    offset: [f64; 3],
}

fn prototype(rng: &mut impl Rng, source: SensorSource) -> Motion {
    let accel = matches!(source, SensorSource::PhoneAccel | SensorSource::WatchAccel);
    let scale = if accel { 3.0 } else { 1.2 };
    let mut offset = [0.0; 3];
    if accel {
        let g: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = (g.iter().map(|v| v * v).sum::<f64>()).sqrt().max(1e-6);
        offset = g.map(|v| 9.8 * v / n);
    }
    Motion {
        freq: rng.random_range(0.6..2.5),
        amp: std::array::from_fn(|_| scale * rng.random_range(0.3..1.0)),
        phase: std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU)),
        harmonic: std::array::from_fn(|_| rng.random_range(0.0..0.6)),
        offset,
    }
}

fn personalize(base: &Motion, rng: &mut impl Rng, spread: f64) -> Motion {
    let mut n = || rng.sample::<f64, _>(StandardNormal);
    Motion {
        freq: base.freq * (1.0 + 0.5 * spread * n()).clamp(0.3, 3.0),
        amp: base.amp.map(|a| a * (1.0 + spread * n()).abs().max(0.1)),
        phase: base.phase.map(|p| p + spread * 3.0 * n()),
        harmonic: base.harmonic.map(|h| (h + 0.5 * spread * n()).clamp(0.0, 1.0)),
        offset: base.offset.map(|o| o + 4.0 * spread * n()),
    }
}

/// Raw readings for every (subject, activity, source) in the config, with
/// strictly increasing timestamps per group.
pub fn synth_raw(cfg: &RawSynthConfig) -> Result<Vec<SensorReading>> {
    if cfg.n_subjects < 2 {
        return Err(Error::Config("n_subjects must be at least 2".into()));
    }
    let per_window = (cfg.window_seconds * cfg.sample_rate_hz).floor() as usize;
    let dt = 1.0 / cfg.sample_rate_hz;
    let step_ns = (1e9 * dt) as i64;
    let mut out = Vec::new();
    for &activity in &cfg.activities {
        for source in cfg.mask.sources() {
            let mut proto_rng = seed::rng(cfg.seed, &[1, activity.code() as u64, source as u64]);
            let proto = prototype(&mut proto_rng, source);
            for s in 0..cfg.n_subjects {
                let subject = cfg.first_subject + s as u32;
                let key = [2, activity.code() as u64, source as u64, subject as u64];
                let mut rng = seed::rng(cfg.seed, &key);
                let motion = personalize(&proto, &mut rng, cfg.subject_spread);
                let jitter = Normal::new(0.0, cfg.session_jitter.max(0.0)).expect("finite sd");
                let mut ts = 1_000_000_000i64 + s as i64 * 7_919_000;
                for _ in 0..cfg.windows_per_activity {
                    let fj = 1.0 + jitter.sample(&mut rng);
                    let aj: [f64; 3] = std::array::from_fn(|_| 1.0 + jitter.sample(&mut rng));
                    let t0 = rng.random_range(0.0..10.0);
                    for k in 0..per_window {
                        let t = t0 + k as f64 * dt;
                        let w = std::f64::consts::TAU * motion.freq * fj * t;
                        let xyz: [f64; 3] = std::array::from_fn(|i| {
                            let a = motion.amp[i] * aj[i];
                            motion.offset[i]
                                + a * ((w + motion.phase[i]).sin()
                                    + motion.harmonic[i] * (2.0 * w + 1.7 * motion.phase[i]).sin())
                                + cfg.noise * a * rng.sample::<f64, _>(StandardNormal)
                        });
                        out.push(SensorReading {
                            subject,
                            activity,
                            timestamp: ts,
                            source,
                            x: xyz[0],
                            y: xyz[1],
                            z: xyz[2],
                        });
                        ts += step_ns;
                    }
                }
            }
        }
    }
    Ok(out)
}
