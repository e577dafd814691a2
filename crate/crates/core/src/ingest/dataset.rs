//! Labeled feature datasets and the canonical feature file.
//!
//! The file is CSV with a header row:
//! `subject,activity,window_index,sensor_mask,<feature columns>`. All rows in
//! one file share a width.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::activity::{ActivityCode, SensorMask, SensorSource};
use crate::error::{Error, Result};
use crate::ingest::features::{fuse, mask_feature_names, FeatureVector, FEATURES_PER_SOURCE};

const META: [&str; 4] = ["subject", "activity", "window_index", "sensor_mask"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<FeatureVector>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.values.len() != columns.len()) {
            return Err(Error::Shape { expected: columns.len(), got: bad.values.len() });
        }
        if rows.iter().any(|r| r.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Parse("non-finite feature value".into()));
        }
        Ok(Self { columns, rows })
    }

    /// Builds a dataset, naming columns from the schema when every row shares
    /// one sensor mask.
    pub fn from_rows(rows: Vec<FeatureVector>) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.values.len());
        let masks: BTreeSet<_> = rows.iter().map(|r| r.sensor_mask).collect();
        let columns = match masks.iter().next() {
            Some(&m) if masks.len() == 1 && width == FEATURES_PER_SOURCE * m.len() => {
                mask_feature_names(m)
            }
            _ => generic_columns(width),
        };
        Self::new(columns, rows)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subjects(&self) -> BTreeSet<u32> {
        self.rows.iter().map(|r| r.subject).collect()
    }

    pub fn activities(&self) -> BTreeSet<ActivityCode> {
        self.rows.iter().map(|r| r.activity).collect()
    }

    pub fn masks(&self) -> BTreeSet<SensorMask> {
        self.rows.iter().map(|r| r.sensor_mask).collect()
    }

    /// Rows for one activity and exact mask.
    pub fn slice(&self, activity: ActivityCode, mask: SensorMask) -> Vec<&FeatureVector> {
        self.rows
            .iter()
            .filter(|r| r.activity == activity && r.sensor_mask == mask)
            .collect()
    }

    /// A view in which every row carries `mask`: rows already at `mask` pass
    /// through; single-source rows sharing (subject, activity, window_index)
    /// are fused. Windows lacking any requested source are dropped.
    pub fn with_mask(&self, mask: SensorMask) -> Result<Dataset> {
        let mut direct = Vec::new();
        let mut groups: BTreeMap<(u32, ActivityCode, u32), BTreeMap<SensorSource, FeatureVector>> =
            BTreeMap::new();
        for r in &self.rows {
            if r.sensor_mask == mask {
                direct.push(r.clone());
            } else if r.sensor_mask.len() == 1 {
                let src = r.sensor_mask.sources().next().unwrap();
                if mask.contains(src) {
                    groups
                        .entry((r.subject, r.activity, r.window_index))
                        .or_default()
                        .insert(src, r.clone());
                }
            }
        }
        if !direct.is_empty() {
            let width = direct[0].values.len();
            let columns = if width == self.dim() {
                self.columns.clone()
            } else {
                generic_columns(width)
            };
            return Dataset::new(columns, direct);
        }
        let rows = groups
            .values()
            .filter(|g| g.len() == mask.len())
            .map(|g| fuse(g, mask))
            .collect::<Result<Vec<_>>>()?;
        Dataset::from_rows(rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(META.iter().copied().chain(self.columns.iter().map(String::as_str)))?;
        for r in &self.rows {
            let mut rec = vec![
                r.subject.to_string(),
                r.activity.to_string(),
                r.window_index.to_string(),
                r.sensor_mask.to_string(),
            ];
            rec.extend(r.values.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < META.len() || header.iter().take(4).ne(META.iter().copied()) {
            return Err(Error::Parse(format!(
                "feature file header must start with {}",
                META.join(",")
            )));
        }
        let columns: Vec<String> = header.iter().skip(4).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 1));
            let values = rec
                .iter()
                .skip(4)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("feature value"))?;
            rows.push(FeatureVector {
                subject: field(0).trim().parse().map_err(|_| bad("subject"))?,
                activity: field(1).parse().map_err(|_| bad("activity"))?,
                window_index: field(2).trim().parse().map_err(|_| bad("window_index"))?,
                sensor_mask: field(3).parse().map_err(|_| bad("sensor_mask"))?,
                values,
            });
        }
        Self::new(columns, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }
}

pub fn generic_columns(width: usize) -> Vec<String> {
    (0..width).map(|i| format!("f{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(subject: u32, mask: SensorMask, widx: u32, fill: f64, n: usize) -> FeatureVector {
        FeatureVector {
            subject,
            activity: ActivityCode::WALKING,
            sensor_mask: mask,
            window_index: widx,
            values: (0..n).map(|i| fill + i as f64 * 0.1).collect(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(1600, SensorMask::PHONE_ACCEL, 0, 0.25, 52),
            row(1601, SensorMask::PHONE_ACCEL, 1, -1.0 / 3.0, 52),
        ];
        let ds = Dataset::from_rows(rows).unwrap();
        assert_eq!(ds.columns[0], "phone-accel_x_bin0");
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("subject,activity,window_index,sensor_mask,phone-accel_x_bin0,"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn rejects_ragged_rows() {
        let rows = vec![
            row(1600, SensorMask::PHONE_ACCEL, 0, 0.0, 52),
            row(1600, SensorMask::PHONE_ACCEL, 1, 0.0, 51),
        ];
        assert!(matches!(Dataset::from_rows(rows), Err(Error::Shape { .. })));
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn with_mask_fuses_aligned_windows() {
        let pa = SensorMask::PHONE_ACCEL;
        let wa = SensorMask::single(SensorSource::WatchAccel);
        let rows = vec![
            row(1600, pa, 0, 1.0, 52),
            row(1600, wa, 0, 2.0, 52),
            row(1600, pa, 1, 1.0, 52),
            row(1600, SensorMask::single(SensorSource::PhoneGyro), 0, 3.0, 52),
        ];
        let ds = Dataset::from_rows(rows).unwrap();
        assert_eq!(ds.columns[0], "f0");
        let fused = ds.with_mask(SensorMask::ALL_ACCEL).unwrap();
        assert_eq!(fused.len(), 1);
        assert_eq!(fused.dim(), 104);
        assert_eq!(fused.columns[52], "watch-accel_x_bin0");
        assert_eq!(fused.rows[0].values[52], 2.0);
        assert_eq!(ds.with_mask(pa).unwrap().len(), 2);
        assert!(ds.with_mask(SensorMask::ALL).unwrap().is_empty());
    }
}
