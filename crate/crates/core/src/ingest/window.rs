//! Non-overlapping fixed-length segmentation.

use std::collections::BTreeMap;

use crate::activity::{ActivityCode, SensorSource};
use crate::ingest::parse::SensorReading;

pub const DEFAULT_WINDOW_SECONDS: f64 = 10.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 20.0;

/// Contiguous readings of one subject, activity and source.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    pub subject: u32,
    pub activity: ActivityCode,
    pub source: SensorSource,
    /// Position of this window within its (subject, activity, source) group.
    pub window_index: u32,
    pub sample_rate_hz: f64,
    pub samples: Vec<[f64; 3]>,
    /// Indices into the input slice, in window order.
    pub reading_indices: Vec<usize>,
}

pub fn window_len(window_seconds: f64, sample_rate_hz: f64) -> usize {
    (window_seconds * sample_rate_hz).floor() as usize
}

/// Splits readings into windows of `⌊window_seconds × sample_rate_hz⌋`
/// samples. Trailing partial windows are dropped. Output is ordered by
/// (subject, activity, source, window_index).
pub fn window(readings: &[SensorReading], window_seconds: f64, sample_rate_hz: f64) -> Vec<RawWindow> {
    let len = window_len(window_seconds, sample_rate_hz);
    if len == 0 {
        return Vec::new();
    }
    let mut groups: BTreeMap<(u32, ActivityCode, SensorSource), Vec<usize>> = BTreeMap::new();
    for (i, r) in readings.iter().enumerate() {
        groups.entry((r.subject, r.activity, r.source)).or_default().push(i);
    }

    let mut out = Vec::new();
    for ((subject, activity, source), indices) in groups {
        for (w, chunk) in indices.chunks_exact(len).enumerate() {
            out.push(RawWindow {
                subject,
                activity,
                source,
                window_index: w as u32,
                sample_rate_hz,
                samples: chunk
                    .iter()
                    .map(|&i| [readings[i].x, readings[i].y, readings[i].z])
                    .collect(),
                reading_indices: chunk.to_vec(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn readings(subject: u32, n: usize, start: i64) -> Vec<SensorReading> {
        (0..n)
            .map(|i| SensorReading {
                subject,
                activity: ActivityCode::WALKING,
                timestamp: start + i as i64 * 50_000_000,
                source: SensorSource::PhoneAccel,
                x: i as f64,
                y: 0.0,
                z: 9.8,
            })
            .collect()
    }

    #[test]
    fn floor_arithmetic() {
        let w = window(&readings(1600, 450, 1), 10.0, 20.0);
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.samples.len() == 200));
        assert_eq!(w[1].samples[0][0], 200.0);
        assert!(window(&readings(1600, 199, 1), 10.0, 20.0).is_empty());
    }

    #[test]
    fn never_spans_subjects() {
        let mut r = readings(1600, 200, 1);
        r.extend(readings(1601, 200, 1));
        let w = window(&r, 10.0, 20.0);
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].subject, w[1].subject), (1600, 1601));
        assert_eq!((w[0].window_index, w[1].window_index), (0, 0));
    }

    proptest! {
        #[test]
        fn windowing_is_a_partition(sizes in proptest::collection::vec(0usize..700, 1..5)) {
            let mut all = Vec::new();
            for (k, n) in sizes.iter().enumerate() {
                all.extend(readings(1600 + k as u32, *n, 1));
            }
            let ws = window(&all, 10.0, 20.0);
            let mut seen = vec![0u8; all.len()];
            for w in &ws {
                for &i in &w.reading_indices {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c <= 1));
            for (k, n) in sizes.iter().enumerate() {
                let count = ws.iter().filter(|w| w.subject == 1600 + k as u32).count();
                prop_assert_eq!(n - 200 * count, n % 200);
            }
            let emitted: usize = seen.iter().map(|&c| c as usize).sum();
            prop_assert_eq!(emitted, 200 * ws.len());
        }
    }
}
