//! CSV tables of the report bundle. Numbers carry four decimals.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use motioncred::experiment::IdentificationSummary;
use motioncred::stats::{ProbabilityStats, HISTOGRAM_BINS};
use motioncred::{ActivityCode, SensorMask};

use crate::layout::ensure_parent;

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path)?))
}

/// One row of `probability_stats.csv`.
#[derive(Debug, Clone)]
pub struct StatsRow {
    pub model: &'static str,
    pub activity: ActivityCode,
    pub mask: SensorMask,
    pub condition: &'static str,
    pub stats: ProbabilityStats,
}

pub fn write_probability_stats(path: &Path, rows: &[StatsRow]) -> Result<()> {
    let mut w = create(path)?;
    let bins: Vec<String> = (0..HISTOGRAM_BINS).map(|b| format!("bin{b:02}")).collect();
    writeln!(w, "model,activity,mask,condition,n,mean,std,{}", bins.join(","))?;
    for r in rows {
        let hist: Vec<String> = r.stats.histogram.iter().map(usize::to_string).collect();
        writeln!(
            w,
            "{},{},{},{},{},{:.4},{:.4},{}",
            r.model,
            r.activity,
            r.mask.label(),
            r.condition,
            r.stats.len(),
            r.stats.mean,
            r.stats.std,
            hist.join(",")
        )?;
    }
    Ok(())
}

pub fn write_gate_stats(path: &Path, rows: &[(ActivityCode, SensorMask, IdentificationSummary)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "activity,mask,threshold,total_samples,misclassified,misclassified_above_threshold,pass_rate,trusted_error_rate,benign_error,adversarial_error"
    )?;
    for (a, m, s) in rows {
        let g = &s.gate;
        writeln!(
            w,
            "{a},{},{:.4},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            m.label(),
            s.threshold,
            g.total_samples,
            g.misclassified,
            g.misclassified_above_threshold,
            g.pass_rate,
            g.trusted_error_rate(),
            1.0 - s.accuracy_before,
            s.adversarial_error()
        )?;
    }
    // Pooled over activities, the form in which trusted-error counts are
    // usually quoted.
    let mut seen = Vec::new();
    for m in rows.iter().map(|r| r.1) {
        if seen.contains(&m) {
            continue;
        }
        seen.push(m);
        let of_mask: Vec<&IdentificationSummary> = rows.iter().filter(|r| r.1 == m).map(|r| &r.2).collect();
        let total: usize = of_mask.iter().map(|s| s.gate.total_samples).sum();
        let wrong: usize = of_mask.iter().map(|s| s.gate.misclassified).sum();
        let passed: usize = of_mask.iter().map(|s| s.gate.misclassified_above_threshold).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let benign_wrong: f64 = of_mask.iter().map(|s| (1.0 - s.accuracy_before) * s.gate.total_samples as f64).sum();
        writeln!(
            w,
            "pooled,{},,{total},{wrong},{passed},{:.4},{:.4},{:.4},{:.4}",
            m.label(),
            ratio(passed, wrong),
            ratio(passed, total),
            if total == 0 { 0.0 } else { benign_wrong / total as f64 },
            ratio(wrong, total)
        )?;
    }
    Ok(())
}
