//! Run configuration: one TOML file, validated in full before any work.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use motioncred::attack::AttackConfig;
use motioncred::experiment::{ExperimentConfig, DEFAULT_TEST_FRACTION};
use motioncred::forest::ForestParams;
use motioncred::gate::ThresholdPolicy;
use motioncred::{ActivityCode, SensorMask};
use serde::Deserialize;

fn default_masks() -> Vec<String> {
    vec!["phone-accel".into()]
}

fn default_policy() -> String {
    "midpoint".into()
}

fn default_folds() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

fn default_percentile() -> f64 {
    5.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: Option<usize>,
    pub features_per_split: Option<usize>,
    pub bootstrap: Option<bool>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub h: Option<f64>,
    pub step_size: Option<f64>,
    pub max_iters: Option<usize>,
    pub kappa: Option<f64>,
    pub coords_per_iter: Option<usize>,
}

/// The file as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Feature file produced by `motioncred ingest`, or a directory of raw
    /// WISDM logs that is ingested on load.
    pub data: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub activities: Vec<String>,
    #[serde(default = "default_masks")]
    pub sensor_masks: Vec<String>,
    #[serde(default = "default_policy")]
    pub threshold_policy: String,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub forest: ForestSection,
    #[serde(default)]
    pub attack: AttackSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub masks: Vec<SensorMask>,
    pub activities: Vec<ActivityCode>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: PathBuf,
    pub output_dir: PathBuf,
    pub activities: Vec<ActivityCode>,
    pub masks: Vec<SensorMask>,
    pub folds: usize,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let raw: RawConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::resolve(raw, base, overrides)
    }

    /// Checks every field; relative paths are taken from `base`.
    pub fn resolve(raw: RawConfig, base: &Path, overrides: &Overrides) -> Result<Self> {
        let seed = overrides
            .seed
            .or(raw.seed)
            .context("a seed is required (config `seed` or --seed)")?;
        let data = base.join(&raw.data);
        if !data.exists() {
            bail!("data file {} does not exist", data.display());
        }
        let output_dir = match &overrides.out {
            Some(out) => out.clone(),
            None => base.join(raw.output_dir.as_deref().unwrap_or(Path::new("out"))),
        };

        let activities = if !overrides.activities.is_empty() {
            overrides.activities.clone()
        } else if raw.activities.is_empty() {
            ActivityCode::all().collect()
        } else {
            raw.activities
                .iter()
                .map(|a| a.parse().map_err(anyhow::Error::from))
                .collect::<Result<Vec<ActivityCode>>>()?
        };
        let masks = if !overrides.masks.is_empty() {
            overrides.masks.clone()
        } else {
            raw.sensor_masks
                .iter()
                .map(|m| m.parse().map_err(anyhow::Error::from))
                .collect::<Result<Vec<SensorMask>>>()?
        };
        if masks.is_empty() {
            bail!("sensor_masks is empty");
        }

        let policy = match raw.threshold_policy.parse::<ThresholdPolicy>()? {
            ThresholdPolicy::BenignPercentile { .. } => {
                if !(0.0..=100.0).contains(&raw.percentile) {
                    bail!("percentile {} outside [0, 100]", raw.percentile);
                }
                ThresholdPolicy::BenignPercentile { percentile: raw.percentile }
            }
            p => p,
        };
        if raw.folds < 2 {
            bail!("folds must be at least 2, got {}", raw.folds);
        }
        if !(0.0 < raw.test_fraction && raw.test_fraction < 1.0) {
            bail!("test_fraction {} outside (0, 1)", raw.test_fraction);
        }

        let d = ForestParams::default();
        let f = &raw.forest;
        let forest = ForestParams {
            n_trees: f.n_trees.unwrap_or(d.n_trees),
            max_depth: f.max_depth.or(d.max_depth),
            min_leaf: f.min_leaf.unwrap_or(d.min_leaf),
            features_per_split: f.features_per_split.or(d.features_per_split),
            bootstrap: f.bootstrap.unwrap_or(d.bootstrap),
            alpha: f.alpha.unwrap_or(d.alpha),
        };
        if forest.n_trees == 0 || forest.min_leaf == 0 || !(forest.alpha > 0.0) {
            bail!("forest: n_trees and min_leaf must be at least 1 and alpha positive");
        }
        let d = AttackConfig::default();
        let a = &raw.attack;
        let attack = AttackConfig {
            h: a.h.unwrap_or(d.h),
            step_size: a.step_size.unwrap_or(d.step_size),
            max_iters: a.max_iters.unwrap_or(d.max_iters),
            kappa: a.kappa.unwrap_or(d.kappa),
            coords_per_iter: a.coords_per_iter.unwrap_or(d.coords_per_iter),
            clip: Vec::new(),
            seed,
        };
        attack.validate(0)?;

        Ok(Self {
            data,
            output_dir,
            activities,
            masks,
            folds: raw.folds,
            experiment: ExperimentConfig {
                forest,
                attack,
                policy,
                test_fraction: raw.test_fraction,
                seed,
            },
        })
    }
}
