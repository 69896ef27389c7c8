//! Minimal SVG line plots of telemetry against communication.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::metrics::{Metric, RoundTelemetry, CSV_HEADER};
use crate::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Reads a telemetry CSV produced by [`crate::metrics::to_csv`].
pub fn read_telemetry_csv(path: impl AsRef<Path>) -> Result<Vec<RoundTelemetry>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("{}: unexpected header `{header}`", path.display())));
    }
    let bad = |line: usize, what: &str| Error::Parse(format!("{}:{line}: bad {what}", path.display()));
    let mut out = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let line = k + 2;
        let float = |i: usize, what: &str| row[i].parse::<f64>().map_err(|_| bad(line, what));
        let opt = |i: usize, what: &str| if row[i].is_empty() { Ok(None) } else { float(i, what).map(Some) };
        out.push(RoundTelemetry {
            round: row[0].parse().map_err(|_| bad(line, "round"))?,
            comm: row[1].parse().map_err(|_| bad(line, "comm"))?,
            grads: row[2].parse().map_err(|_| bad(line, "grads"))?,
            grad_norm: float(3, "grad_norm")?,
            subopt: opt(4, "subopt")?,
            consensus_x: float(5, "consensus_x")?,
            consensus_v: opt(6, "consensus_v")?,
            tracking_err: float(7, "tracking_err")?,
            inner_iters: row[8].parse().map_err(|_| bad(line, "inner_iters"))?,
        });
    }
    Ok(out)
}

/// Points `(comm, metric)` with a positive metric, in plot coordinates.
/// The y axis is logarithmic; all series share one frame.
pub fn plot_coordinates(series: &[Vec<(f64, f64)>]) -> Vec<Vec<(f64, f64)>> {
    let pts = series.iter().flatten().filter(|p| p.1 > 0.0 && p.1.is_finite());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y.log10());
        y_hi = y_hi.max(y.log10());
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let sx = (WIDTH - 2.0 * MARGIN) / (x_hi - x_lo);
    let sy = (HEIGHT - 2.0 * MARGIN) / (y_hi - y_lo);
    series
        .iter()
        .map(|s| {
            s.iter()
                .filter(|p| p.1 > 0.0 && p.1.is_finite())
                .map(|&(x, y)| (MARGIN + (x - x_lo) * sx, HEIGHT - MARGIN - (y.log10() - y_lo) * sy))
                .collect()
        })
        .collect()
}

/// SVG document with one labeled polyline per series.
pub fn render_svg(labels: &[String], series: &[Vec<(f64, f64)>], y_label: &str) -> String {
    let coords = plot_coordinates(series);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">communication</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {})">{y_label} (log)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (k, (label, pts)) in labels.iter().zip(&coords).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(label),
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + 18.0 * (k + 1) as f64,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Plots `metric` against cumulative communication for every record.
pub fn emit_plot(records: &[(String, Vec<RoundTelemetry>)], metric: Metric, path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let labels: Vec<String> = records.iter().map(|(l, _)| l.clone()).collect();
    let series: Vec<Vec<(f64, f64)>> = records
        .iter()
        .map(|(_, rec)| rec.iter().filter_map(|t| metric.of(t).map(|v| (t.comm as f64, v))).collect())
        .collect();
    let name = match metric {
        Metric::GradNorm => "grad_norm",
        Metric::Subopt => "subopt",
    };
    fs::write(path, render_svg(&labels, &series, name))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_flat() {
        let c = plot_coordinates(&[vec![(0.0, 2.0), (5.0, 2.0), (9.0, 2.0)]]);
        assert!(c[0].windows(2).all(|w| w[0].1 == w[1].1 && w[0].0 < w[1].0));
    }

    #[test]
    fn decay_goes_down_the_page() {
        let s: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 0.5f64.powi(k))).collect();
        let c = plot_coordinates(&[s]);
        // svg y grows downward
        assert!(c[0].windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn two_labeled_series() {
        let svg = render_svg(
            &["a".into(), "b<c".into()],
            &[vec![(0.0, 1.0), (1.0, 0.1)], vec![(0.0, 1.0), (1.0, 0.5)]],
            "grad_norm",
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("data-label=\"b&lt;c\""));
    }
}
