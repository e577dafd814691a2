//! Predicted-class probability summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ProbabilityVector;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Benign,
    Adversarial,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Self::Benign => "benign",
            Self::Adversarial => "adversarial",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mean, standard deviation and a 20-bin histogram over `[0, 1]` of
/// predicted-class probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityStats {
    pub condition: Condition,
    /// Number of classes of the model the probabilities came from.
    pub n_classes: usize,
    pub mean: f64,
    pub std: f64,
    pub histogram: [usize; HISTOGRAM_BINS],
    pub values: Vec<f64>,
}

impl ProbabilityStats {
    pub fn from_values(values: Vec<f64>, n_classes: usize, condition: Condition) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySlice(format!("{condition} probability sample")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut histogram = [0; HISTOGRAM_BINS];
        for &v in &values {
            let b = (v.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64) as usize;
            histogram[b.min(HISTOGRAM_BINS - 1)] += 1;
        }
        Ok(Self { condition, n_classes, mean, std, histogram, values })
    }

    /// Stats over the top-1 entry of each probability vector.
    pub fn from_probabilities(probas: &[ProbabilityVector], condition: Condition) -> Result<Self> {
        let n_classes = probas.first().map_or(0, ProbabilityVector::len);
        Self::from_values(probas.iter().map(ProbabilityVector::top1).collect(), n_classes, condition)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear-interpolated percentile, `q` in `[0, 100]`.
    pub fn percentile(&self, q: f64) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let pos = (q.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    }
}
