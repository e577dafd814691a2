use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature z-scoring fitted on training rows, with the observed
/// training range used as default attack bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).ok_or_else(|| Error::EmptySlice("scaler input".into()))?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::Shape { expected: d, got: r.len() });
            }
            for j in 0..d {
                mean[j] += r[j] / n;
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        let std = (0..d)
            .map(|j| {
                let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                // Constant features keep unit scale.
                if v > 0.0 { v.sqrt() } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std, min, max })
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| v * s + m).collect()
    }

    /// Training range in normalized units.
    pub fn normalized_bounds(&self) -> Vec<(f64, f64)> {
        (0..self.mean.len())
            .map(|j| ((self.min[j] - self.mean[j]) / self.std[j], (self.max[j] - self.mean[j]) / self.std[j]))
            .collect()
    }
}
