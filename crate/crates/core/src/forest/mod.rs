//! Random-forest classifier with smoothed class-probability output.
//!
//! Trees are grown on bootstrap resamples with per-tree seeds derived from
//! the master seed and the tree index, so a trained forest does not depend
//! on how many threads built it.

pub mod folds;
pub mod tree;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
pub use folds::{stratified_folds, FoldAssignment};
use tree::{GrowParams, TrainData, Tree};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` means ⌈√d⌉.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    /// Laplace pseudo-count added per class.
    pub alpha: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            alpha: 1.0,
        }
    }
}

/// Class probabilities aligned with a forest's class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityVector(pub Vec<f64>);

impl ProbabilityVector {
    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    }

    pub fn top1(&self) -> f64 {
        self.0[self.argmax()]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionForest {
    pub schema_version: u32,
    pub params: ForestParams,
    /// Sorted class labels; probability entries follow this order.
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub master_seed: u64,
    pub trees: Vec<Tree>,
}

impl DecisionForest {
    pub fn train(rows: &[&[f64]], labels: &[u32], params: &ForestParams, seed: u64) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape { expected: rows.len(), got: labels.len() });
        }
        let n_features = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::Shape { expected: n_features, got: bad.len() });
        }
        if n_features == 0 {
            return Err(Error::Training("no features".into()));
        }
        if params.n_trees == 0 || params.min_leaf == 0 {
            return Err(Error::Training("n_trees and min_leaf must be positive".into()));
        }
        if !(params.alpha > 0.0) {
            return Err(Error::Training("alpha must be positive".into()));
        }

        let mut classes: Vec<u32> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::Training(format!(
                "need at least two classes, found {}",
                classes.len()
            )));
        }
        let index: BTreeMap<u32, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let y: Vec<usize> = labels.iter().map(|l| index[l]).collect();

        let data = TrainData { rows, labels: &y, n_classes: classes.len(), n_features };
        let grow = GrowParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            features_per_split: params
                .features_per_split
                .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize),
        };
        let n = rows.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed, &[t as u64]);
                let sample: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                Tree::grow(&data, sample, &grow, &mut rng)
            })
            .collect();

        Ok(Self {
            schema_version: SCHEMA_VERSION,
            params: params.clone(),
            classes,
            n_features,
            master_seed: seed,
            trees,
        })
    }

    /// Leaf class counts pooled over all trees, Laplace-smoothed:
    /// `p_c = (Σ_t n_tc + α) / (Σ_t N_t + Kα)`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityVector> {
        if x.len() != self.n_features {
            return Err(Error::Shape { expected: self.n_features, got: x.len() });
        }
        let k = self.classes.len();
        let mut pooled = vec![0u64; k];
        for tree in &self.trees {
            for (p, &c) in pooled.iter_mut().zip(tree.leaf(x)) {
                *p += c as u64;
            }
        }
        let alpha = self.params.alpha;
        let total = pooled.iter().sum::<u64>() as f64 + k as f64 * alpha;
        Ok(ProbabilityVector(
            pooled.iter().map(|&c| (c as f64 + alpha) / total).collect(),
        ))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u32> {
        Ok(self.classes[self.predict_proba(x)?.argmax()])
    }

    pub fn class_index(&self, label: u32) -> Option<usize> {
        self.classes.binary_search(&label).ok()
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy(&self, rows: &[&[f64]], labels: &[u32]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::EmptySlice("accuracy input".into()));
        }
        let hits = rows
            .iter()
            .zip(labels)
            .map(|(x, &l)| self.predict(x).map(|p| usize::from(p == l)))
            .sum::<Result<usize>>()?;
        Ok(hits as f64 / rows.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        serde_json::to_writer(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let forest: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if forest.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "{}: unsupported model schema version {}",
                path.display(),
                forest.schema_version
            )));
        }
        Ok(forest)
    }
}
