//! Per-window statistical features and multi-sensor fusion.
//!
//! Each source contributes 52 values: for each axis x, y, z a 10-bin
//! normalized distribution over the window's own min–max range, mean,
//! standard deviation, variance, mean absolute deviation and the average
//! time between peaks; then Pearson correlation and cosine similarity for
//! the pairs (x,y), (x,z), (y,z); then the mean resultant magnitude.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityCode, SensorMask, SensorSource};
use crate::error::{Error, Result};
use crate::ingest::window::RawWindow;

pub const BINS: usize = 10;
pub const FEATURES_PER_AXIS: usize = BINS + 5;
pub const FEATURES_PER_SOURCE: usize = 3 * FEATURES_PER_AXIS + 6 + 1;

/// One window reduced to a fixed-length vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub subject: u32,
    pub activity: ActivityCode,
    pub sensor_mask: SensorMask,
    pub window_index: u32,
    pub values: Vec<f64>,
}

const AXES: [&str; 3] = ["x", "y", "z"];
const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Column names for one source, in extraction order.
pub fn feature_names(source: SensorSource) -> Vec<String> {
    let p = source.name();
    let mut names = Vec::with_capacity(FEATURES_PER_SOURCE);
    for axis in AXES {
        names.extend((0..BINS).map(|b| format!("{p}_{axis}_bin{b}")));
        for stat in ["mean", "std", "var", "mad", "peak_interval"] {
            names.push(format!("{p}_{axis}_{stat}"));
        }
    }
    for kind in ["corr", "cos"] {
        for (a, b) in PAIRS {
            names.push(format!("{p}_{kind}_{}{}", AXES[a], AXES[b]));
        }
    }
    names.push(format!("{p}_resultant"));
    names
}

pub fn mask_feature_names(mask: SensorMask) -> Vec<String> {
    mask.sources().flat_map(feature_names).collect()
}

struct AxisSummary {
    mean: f64,
    std: f64,
    constant: bool,
}

fn summarize(a: &[f64]) -> AxisSummary {
    let (lo, hi) = min_max(a);
    if lo == hi {
        return AxisSummary { mean: lo, std: 0.0, constant: true };
    }
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    AxisSummary { mean, std: var.sqrt(), constant: false }
}

fn min_max(a: &[f64]) -> (f64, f64) {
    a.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn axis_features(a: &[f64], s: &AxisSummary, sample_rate_hz: f64, out: &mut Vec<f64>) {
    let mut bins = [0.0; BINS];
    if s.constant {
        bins[0] = 1.0;
    } else {
        let (lo, hi) = min_max(a);
        for &v in a {
            let k = ((v - lo) / (hi - lo) * BINS as f64).floor() as usize;
            bins[k.min(BINS - 1)] += 1.0;
        }
        let n = a.len() as f64;
        bins.iter_mut().for_each(|b| *b /= n);
    }
    out.extend_from_slice(&bins);

    let mad = if s.constant {
        0.0
    } else {
        a.iter().map(|v| (v - s.mean).abs()).sum::<f64>() / a.len() as f64
    };
    out.extend([s.mean, s.std, s.std * s.std, mad]);

    // Peaks: interior local maxima strictly above mean + std.
    let cut = s.mean + s.std;
    let peaks: Vec<usize> = (1..a.len().saturating_sub(1))
        .filter(|&j| a[j] > a[j - 1] && a[j] >= a[j + 1] && a[j] > cut)
        .collect();
    let interval = if peaks.len() < 2 {
        0.0
    } else {
        let gaps = peaks.windows(2).map(|w| (w[1] - w[0]) as f64).sum::<f64>();
        gaps / (peaks.len() - 1) as f64 / sample_rate_hz
    };
    out.push(interval);
}

fn pearson(a: &[f64], sa: &AxisSummary, b: &[f64], sb: &AxisSummary) -> f64 {
    if sa.constant || sb.constant || sa.std == 0.0 || sb.std == 0.0 {
        return 0.0;
    }
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - sa.mean) * (y - sb.mean))
        .sum::<f64>()
        / a.len() as f64;
    cov / (sa.std * sb.std)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Reduces one raw window to its 52 features.
pub fn extract_features(window: &RawWindow) -> Result<FeatureVector> {
    if window.samples.is_empty() {
        return Err(Error::EmptySlice(format!(
            "window {} of subject {}",
            window.window_index, window.subject
        )));
    }
    let axes: [Vec<f64>; 3] =
        std::array::from_fn(|k| window.samples.iter().map(|s| s[k]).collect());
    let summaries: Vec<AxisSummary> = axes.iter().map(|a| summarize(a)).collect();

    let mut values = Vec::with_capacity(FEATURES_PER_SOURCE);
    for (a, s) in axes.iter().zip(&summaries) {
        axis_features(a, s, window.sample_rate_hz, &mut values);
    }
    for (i, j) in PAIRS {
        values.push(pearson(&axes[i], &summaries[i], &axes[j], &summaries[j]));
    }
    for (i, j) in PAIRS {
        values.push(cosine(&axes[i], &axes[j]));
    }
    let resultant = window
        .samples
        .iter()
        .map(|[x, y, z]| (x * x + y * y + z * z).sqrt())
        .sum::<f64>()
        / window.samples.len() as f64;
    values.push(resultant);
    debug_assert_eq!(values.len(), FEATURES_PER_SOURCE);

    Ok(FeatureVector {
        subject: window.subject,
        activity: window.activity,
        sensor_mask: SensorMask::single(window.source),
        window_index: window.window_index,
        values,
    })
}

/// Concatenates per-source vectors in fixed source order, restricted to
/// `mask`.
pub fn fuse(vectors: &BTreeMap<SensorSource, FeatureVector>, mask: SensorMask) -> Result<FeatureVector> {
    let first = vectors
        .values()
        .next()
        .ok_or_else(|| Error::EmptySlice("fusion input".into()))?;
    let mut values = Vec::new();
    let mut fused_mask: Option<SensorMask> = None;
    for source in mask.sources() {
        let v = vectors.get(&source).ok_or(Error::Fusion {
            subject: first.subject,
            activity: first.activity.code(),
            window_index: first.window_index,
            source_name: source.name(),
        })?;
        if (v.subject, v.activity, v.window_index)
            != (first.subject, first.activity, first.window_index)
        {
            return Err(Error::Config(format!(
                "fusion inputs disagree: {} window {} vs {} window {}",
                first.subject, first.window_index, v.subject, v.window_index
            )));
        }
        values.extend_from_slice(&v.values);
        fused_mask = Some(fused_mask.map_or(v.sensor_mask, |m| m.union(v.sensor_mask)));
    }
    Ok(FeatureVector {
        subject: first.subject,
        activity: first.activity,
        sensor_mask: fused_mask.unwrap_or(mask),
        window_index: first.window_index,
        values,
    })
}
