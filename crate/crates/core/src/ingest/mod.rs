//! Raw sensor logs to labeled feature datasets.

pub mod dataset;
pub mod features;
pub mod parse;
pub mod synth;
pub mod window;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use dataset::Dataset;
pub use features::{extract_features, feature_names, fuse, mask_feature_names, FeatureVector, FEATURES_PER_SOURCE};
pub use parse::{parse_file, parse_raw, ParsedLog, SensorReading};
pub use synth::{synth_generate, synth_raw, RawSynthConfig, SynthConfig};
pub use window::{window, RawWindow, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_WINDOW_SECONDS};

use crate::activity::{ActivityCode, SensorSource};
use crate::error::{Error, Result};

/// Windows per (subject, activity, source) produced by an ingest run.
pub type WindowCounts = BTreeMap<(u32, ActivityCode, SensorSource), usize>;

#[derive(Debug, Clone, Default)]
pub struct IngestSummary {
    pub window_counts: WindowCounts,
    pub malformed_lines: usize,
}

/// Windows and featurizes readings; one single-source row per window.
pub fn featurize(readings: &[SensorReading], window_seconds: f64, sample_rate_hz: f64) -> Result<(Dataset, WindowCounts)> {
    let windows = window(readings, window_seconds, sample_rate_hz);
    let mut counts = WindowCounts::new();
    for w in &windows {
        *counts.entry((w.subject, w.activity, w.source)).or_default() += 1;
    }
    let rows = windows
        .par_iter()
        .map(extract_features)
        .collect::<Result<Vec<_>>>()?;
    Ok((Dataset::from_rows(rows)?, counts))
}

/// Ingests raw log files, inferring each file's source from its path.
pub fn ingest_files(paths: &[PathBuf], window_seconds: f64, sample_rate_hz: f64) -> Result<(Dataset, IngestSummary)> {
    let mut readings = Vec::new();
    let mut malformed = 0;
    for path in paths {
        let source = SensorSource::from_path(path).ok_or_else(|| {
            Error::Config(format!("cannot infer sensor source from {}", path.display()))
        })?;
        let log = parse_file(path, source)?;
        malformed += log.malformed;
        readings.extend(log.readings);
    }
    let (ds, window_counts) = featurize(&readings, window_seconds, sample_rate_hz)?;
    Ok((ds, IngestSummary { window_counts, malformed_lines: malformed }))
}

/// All `.txt` files under `root` whose path names a sensor source, sorted.
pub fn discover_raw_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "txt")
                && SensorSource::from_path(&path).is_some()
            {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
