//! Output directory layout.
//!
//! ```text
//! <out>/models/id/<activity>_<mask>.model         identification forest
//! <out>/models/id/<activity>_<mask>.scaler        z-score parameters for the attack
//! <out>/models/auth/<subject>_<activity>_<mask>.model
//! <out>/models/auth/<subject>_<activity>_<mask>.scaler
//! <out>/models/thresholds.table
//! <out>/holdout/{id,auth}/<key>.csv               benign test windows
//! <out>/adversarial/{id,auth}/<key>.csv           attacked test windows
//! <out>/adversarial/{id,auth}/<key>.sidecar.csv   per-window attack outcome
//! <out>/reports/                                  CSV tables and SVG figures
//! ```
//!
//! Holdout and adversarial files use the feature-file format; the subject
//! column holds the subject that produced the window.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use motioncred::attack::{AttackResult, FeatureScaler};
use motioncred::gate::ModelStore;
use motioncred::{ActivityCode, DecisionForest, SensorMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKey {
    Id(ActivityCode, SensorMask),
    Auth(u32, ActivityCode, SensorMask),
}

impl ModelKey {
    pub fn stem(self) -> String {
        match self {
            Self::Id(a, m) => format!("{a}_{}", m.label()),
            Self::Auth(s, a, m) => format!("{s}_{a}_{}", m.label()),
        }
    }

    fn dir(self) -> &'static str {
        match self {
            Self::Id(..) => "id",
            Self::Auth(..) => "auth",
        }
    }

    pub fn activity(self) -> ActivityCode {
        match self {
            Self::Id(a, _) | Self::Auth(_, a, _) => a,
        }
    }

    pub fn mask(self) -> SensorMask {
        match self {
            Self::Id(_, m) | Self::Auth(_, _, m) => m,
        }
    }

    fn parse(dir: &str, stem: &str) -> Result<Self> {
        let parts: Vec<&str> = stem.split('_').collect();
        let key = match (dir, parts.as_slice()) {
            ("id", [a, m]) => Self::Id(a.parse()?, m.parse()?),
            ("auth", [s, a, m]) => Self::Auth(s.parse()?, a.parse()?, m.parse()?),
            _ => bail!("unrecognized model file name {dir}/{stem}"),
        };
        Ok(key)
    }
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn thresholds(&self) -> PathBuf {
        self.models().join("thresholds.table")
    }

    pub fn model(&self, key: ModelKey) -> PathBuf {
        self.models().join(key.dir()).join(format!("{}.model", key.stem()))
    }

    pub fn scaler(&self, key: ModelKey) -> PathBuf {
        self.models().join(key.dir()).join(format!("{}.scaler", key.stem()))
    }

    pub fn holdout(&self, key: ModelKey) -> PathBuf {
        self.root.join("holdout").join(key.dir()).join(format!("{}.csv", key.stem()))
    }

    pub fn adversarial(&self, key: ModelKey) -> PathBuf {
        self.root.join("adversarial").join(key.dir()).join(format!("{}.csv", key.stem()))
    }

    pub fn sidecar(&self, key: ModelKey) -> PathBuf {
        self.root.join("adversarial").join(key.dir()).join(format!("{}.sidecar.csv", key.stem()))
    }

    /// Every saved model, identification first, in key order.
    pub fn model_keys(&self) -> Result<Vec<ModelKey>> {
        let mut keys = Vec::new();
        for dir in ["id", "auth"] {
            let path = self.models().join(dir);
            if !path.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&path)? {
                let p = entry?.path();
                if p.extension().is_some_and(|e| e == "model") {
                    let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
                    keys.push(ModelKey::parse(dir, &stem)?);
                }
            }
        }
        keys.sort();
        if keys.is_empty() {
            bail!("no models under {}; run `motioncred train` first", self.models().display());
        }
        Ok(keys)
    }

    pub fn load_store(&self) -> Result<ModelStore> {
        let mut store = ModelStore::default();
        for key in self.model_keys()? {
            let model = load_model(&self.model(key))?;
            match key {
                ModelKey::Id(a, m) => store.id.insert((a, m), model),
                ModelKey::Auth(s, a, m) => store.auth.insert((s, a, m), model),
            };
        }
        Ok(store)
    }
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<DecisionForest> {
    DecisionForest::load(path).with_context(|| format!("loading model {}", path.display()))
}

pub fn save_model(path: &Path, model: &DecisionForest) -> Result<()> {
    ensure_parent(path)?;
    model.save(path).with_context(|| format!("writing {}", path.display()))
}

pub fn save_scaler(path: &Path, scaler: &FeatureScaler) -> Result<()> {
    ensure_parent(path)?;
    serde_json::to_writer(BufWriter::new(File::create(path)?), scaler)?;
    Ok(())
}

pub fn load_scaler(path: &Path) -> Result<FeatureScaler> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// `sample_id,success,queries,final_loss`.
pub fn write_sidecar(path: &Path, results: &[AttackResult]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "sample_id,success,queries,final_loss")?;
    for (i, r) in results.iter().enumerate() {
        // Adding 0.0 turns a -0.0 loss into 0.0.
        writeln!(w, "{i},{},{},{:.4}", r.success, r.queries, r.final_loss + 0.0)?;
    }
    Ok(())
}
