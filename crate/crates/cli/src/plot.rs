//! SVG figure analogs.

use std::path::Path;

use anyhow::{anyhow, Result};
use motioncred::stats::{ProbabilityStats, HISTOGRAM_BINS};
use motioncred::ActivityCode;
use plotters::prelude::*;

use crate::layout::ensure_parent;

const BENIGN: RGBColor = RGBColor(31, 119, 180);
const ADVERSARIAL: RGBColor = RGBColor(214, 39, 40);

fn err<E: std::fmt::Display>(e: E) -> anyhow::Error {
    anyhow!("plotting failed: {e}")
}

/// Histogram of top-1 probabilities as a density over `[0, 1]`.
fn density(stats: &ProbabilityStats) -> Vec<(f64, f64)> {
    let width = 1.0 / HISTOGRAM_BINS as f64;
    let n = stats.len().max(1) as f64;
    stats
        .histogram
        .iter()
        .enumerate()
        .map(|(b, &c)| ((b as f64 + 0.5) * width, c as f64 / (n * width)))
        .collect()
}

/// One panel per activity with benign and adversarial densities.
pub fn density_panels(path: &Path, title: &str, panels: &[(ActivityCode, &ProbabilityStats, &ProbabilityStats)]) -> Result<()> {
    ensure_parent(path)?;
    let root = SVGBackend::new(path, (480 * panels.len().max(1) as u32, 400)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let root = root.titled(title, ("sans-serif", 22)).map_err(err)?;
    let areas = root.split_evenly((1, panels.len().max(1)));
    for (area, (activity, benign, adversarial)) in areas.iter().zip(panels) {
        let (b, a) = (density(benign), density(adversarial));
        let ymax = b.iter().chain(&a).map(|p| p.1).fold(1.0, f64::max) * 1.1;
        let mut chart = ChartBuilder::on(area)
            .caption(activity.name(), ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(48)
            .build_cartesian_2d(0f64..1f64, 0f64..ymax)
            .map_err(err)?;
        chart
            .configure_mesh()
            .x_desc("top-1 probability")
            .y_desc("density")
            .draw()
            .map_err(err)?;
        for (points, stats, color, name) in [(b, benign, BENIGN, "benign"), (a, adversarial, ADVERSARIAL, "adversarial")] {
            chart
                .draw_series(LineSeries::new(points, color.stroke_width(2)))
                .map_err(err)?
                .label(format!("{name} (mean {:.2})", stats.mean))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::UpperLeft)
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(err)?;
    }
    root.present().map_err(err)?;
    Ok(())
}

/// Two series over activities, e.g. benign against adversarial error.
pub struct PairedSeries<'a> {
    pub title: &'a str,
    pub y_desc: &'a str,
    pub names: [&'a str; 2],
    pub points: Vec<(ActivityCode, f64, f64)>,
}

pub fn paired_by_activity(path: &Path, s: &PairedSeries<'_>) -> Result<()> {
    ensure_parent(path)?;
    let n = s.points.len() as i32;
    let ymax = s.points.iter().map(|p| p.1.max(p.2)).fold(0.0, f64::max).max(0.05) * 1.15;
    let root = SVGBackend::new(path, (900, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(s.title, ("sans-serif", 22))
        .margin(14)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(-1..n, 0f64..ymax)
        .map_err(err)?;
    let codes: Vec<ActivityCode> = s.points.iter().map(|p| p.0).collect();
    let label = |i: &i32| usize::try_from(*i).ok().and_then(|i| codes.get(i)).map_or(String::new(), |a| a.to_string());
    chart
        .configure_mesh()
        .x_labels(codes.len() + 2)
        .x_label_formatter(&label)
        .x_desc("activity")
        .y_desc(s.y_desc)
        .draw()
        .map_err(err)?;
    for (k, color) in [(0usize, BENIGN), (1, ADVERSARIAL)] {
        let pts: Vec<(i32, f64)> = s
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i as i32, if k == 0 { p.1 } else { p.2 }))
            .collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(err)?
            .label(s.names[k])
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 4, color.filled())))
            .map_err(err)?;
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use motioncred::stats::Condition;

    #[test]
    fn writes_svg_files() {
        let dir = tempfile::tempdir().unwrap();
        let b = ProbabilityStats::from_values(vec![0.8, 0.9, 0.95], 5, Condition::Benign).unwrap();
        let a = ProbabilityStats::from_values(vec![0.2, 0.3], 5, Condition::Adversarial).unwrap();
        let p = dir.path().join("d.svg");
        density_panels(&p, "density", &[(ActivityCode::WALKING, &b, &a), (ActivityCode::JOGGING, &b, &a)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("walking"));
        let q = dir.path().join("p.svg");
        paired_by_activity(
            &q,
            &PairedSeries {
                title: "EER",
                y_desc: "EER",
                names: ["benign", "adversarial"],
                points: vec![(ActivityCode::WALKING, 0.05, 0.3), (ActivityCode::TYPING, 0.02, 0.2)],
            },
        )
        .unwrap();
        assert!(std::fs::read_to_string(&q).unwrap().contains("adversarial"));
    }
}
