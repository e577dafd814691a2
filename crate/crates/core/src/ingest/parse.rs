//! Raw sensor log parsing.
//!
//! Each non-empty line is `subject,activity_code,timestamp,x,y,z;` with an
//! optional trailing semicolon. Malformed lines are counted and skipped.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityCode, SensorSource};
use crate::error::{Error, Result};

/// One timestamped tri-axial sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub subject: u32,
    pub activity: ActivityCode,
    /// Nanoseconds, strictly positive.
    pub timestamp: i64,
    pub source: SensorSource,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub readings: Vec<SensorReading>,
    pub malformed: usize,
}

pub fn parse_line(line: &str, source: SensorSource) -> Option<SensorReading> {
    let line = line.trim();
    let line = line.strip_suffix(';').unwrap_or(line);
    let mut fields = line.split(',').map(str::trim);
    let subject = fields.next()?.parse().ok()?;
    let activity = fields.next()?.parse::<ActivityCode>().ok()?;
    let timestamp: i64 = fields.next()?.parse().ok()?;
    let mut axis = || -> Option<f64> {
        let v: f64 = fields.next()?.parse().ok()?;
        v.is_finite().then_some(v)
    };
    let (x, y, z) = (axis()?, axis()?, axis()?);
    if fields.next().is_some() || timestamp <= 0 {
        return None;
    }
    Some(SensorReading {
        subject,
        activity,
        timestamp,
        source,
        x,
        y,
        z,
    })
}

/// Parses a raw log stream. More than half the non-empty lines being
/// malformed is reported as a format error.
pub fn parse_raw<R: BufRead>(stream: R, source: SensorSource) -> Result<ParsedLog> {
    parse_named(stream, source, "<stream>")
}

pub fn parse_file(path: &Path, source: SensorSource) -> Result<ParsedLog> {
    let file = File::open(path)?;
    parse_named(BufReader::new(file), source, &path.display().to_string())
}

fn parse_named<R: BufRead>(stream: R, source: SensorSource, origin: &str) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    let mut total = 0usize;
    for line in stream.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_line(&line, source) {
            Some(r) => out.readings.push(r),
            None => out.malformed += 1,
        }
    }
    if out.malformed * 2 > total {
        return Err(Error::Format {
            origin: origin.to_string(),
            malformed: out.malformed,
            total,
        });
    }
    Ok(out)
}

/// Inverse of [`parse_line`].
pub fn format_reading(r: &SensorReading) -> String {
    format!(
        "{},{},{},{},{},{};",
        r.subject, r.activity, r.timestamp, r.x, r.y, r.z
    )
}
