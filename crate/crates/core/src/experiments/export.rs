//! CSV and SVG renderings of sweep results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Aggregate, ExperimentError, SweepResult};
use crate::metrics::{is_counter, COUNTER_FIELDS};

/// Formats `x` with `digits` significant digits in plain decimal notation.
pub fn format_significant(x: f64, digits: u32) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1) as i32;
    let render = |mag: i32| -> String {
        let decimals = digits - 1 - mag;
        if decimals >= 0 {
            format!("{:.*}", decimals as usize, x)
        } else {
            let scale = 10f64.powi(-decimals);
            format!("{:.0}", (x / scale).round() * scale)
        }
    };
    let mag = x.abs().log10().floor() as i32;
    let s = render(mag);
    // Rounding can carry into the next decade (9.999996 -> 10.00000).
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && (rounded.abs().log10().floor() as i32) > mag {
        render(mag + 1)
    } else {
        s
    }
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn point_order(result: &SweepResult) -> Vec<usize> {
    let mut order: Vec<usize> = (0..result.points.len()).collect();
    order.sort_by_key(|&i| result.points[i].value);
    order
}

/// Per-replicate final counters as CSV text.
pub fn sweep_replicates_csv(result: &SweepResult) -> Result<String, ExperimentError> {
    let path = Path::new("<replicates>");
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["param_name", "param_value", "replicate", "seed", "tick"];
    header.extend(COUNTER_FIELDS);
    w.write_record(&header).map_err(csv_error(path))?;
    for i in point_order(result) {
        let point = &result.points[i];
        for rep in &point.replicates {
            let mut row = vec![
                result.param.name().to_string(),
                point.value.to_string(),
                rep.replicate.to_string(),
                rep.seed.to_string(),
                rep.snapshot.tick.to_string(),
            ];
            row.extend(rep.snapshot.counters().iter().map(u32::to_string));
            w.write_record(&row).map_err(csv_error(path))?;
        }
    }
    finish_csv(w, path)
}

/// Per-metric aggregates as CSV text.
pub fn sweep_aggregates_csv(result: &SweepResult) -> Result<String, ExperimentError> {
    let path = Path::new("<aggregates>");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "param_name",
        "param_value",
        "metric",
        "n",
        "min",
        "max",
        "mean",
        "ci_low",
        "ci_high",
    ])
    .map_err(csv_error(path))?;
    for i in point_order(result) {
        let point = &result.points[i];
        let mut rows: Vec<&(String, Aggregate)> = point.aggregates.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for (metric, a) in rows {
            w.write_record([
                result.param.name().to_string(),
                point.value.to_string(),
                metric.clone(),
                a.n.to_string(),
                a.min.to_string(),
                a.max.to_string(),
                a.mean.to_string(),
                format_significant(a.ci_low, 6),
                format_significant(a.ci_high, 6),
            ])
            .map_err(csv_error(path))?;
        }
    }
    finish_csv(w, path)
}

fn finish_csv(w: csv::Writer<Vec<u8>>, path: &Path) -> Result<String, ExperimentError> {
    let bytes = w.into_inner().map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<path>.replicates.csv` and `<path>.aggregates.csv`; returns both
/// paths.
pub fn export_sweep_csv(
    result: &SweepResult,
    path: &Path,
) -> Result<(PathBuf, PathBuf), ExperimentError> {
    let replicates = with_suffix(path, ".replicates.csv");
    let aggregates = with_suffix(path, ".aggregates.csv");
    write_file(&replicates, &sweep_replicates_csv(result)?)?;
    write_file(&aggregates, &sweep_aggregates_csv(result)?)?;
    Ok((replicates, aggregates))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Error-bar chart of one metric across the sweep: a mean marker, a min–max
/// whisker and a confidence-interval box per point.
pub fn render_errorbar_svg(result: &SweepResult, metric: &str) -> Result<String, ExperimentError> {
    if !is_counter(metric) {
        return Err(ExperimentError::UnknownMetric(metric.to_string()));
    }
    let mut points: Vec<(f64, Aggregate)> = Vec::new();
    for i in point_order(result) {
        let p = &result.points[i];
        let a = p
            .aggregate_of(metric)
            .ok_or_else(|| ExperimentError::UnknownMetric(metric.to_string()))?;
        points.push((f64::from(p.value.value()), *a));
    }

    let x_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = points
        .iter()
        .map(|(_, a)| a.min.min(a.ci_low))
        .fold(0.0, f64::min);
    let mut y_hi = points
        .iter()
        .map(|(_, a)| a.max.max(a.ci_high))
        .fold(0.0, f64::max);
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| {
        if x_hi > x_lo {
            LEFT + 20.0 + (x - x_lo) / (x_hi - x_lo) * (plot_w - 40.0)
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let param = xml_escape(result.param.name());
    let metric_label = xml_escape(metric);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, "<title>{metric_label} by {param}</title>");
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (x0, y0, x1, y1) = (LEFT, TOP + plot_h, LEFT + plot_w, TOP);
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"#
    );

    let _ = writeln!(
        s,
        r#"<g class="ticks" font-family="sans-serif" font-size="11">"#
    );
    for (x, _) in &points {
        let px = sx(*x);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
            y0 + 5.0,
            y0 + 18.0
        );
    }
    for k in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * f64::from(k) / 5.0;
        let py = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            format_significant(v, 4)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{param}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.2})">{metric_label}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let _ = writeln!(s, r#"<g class="points">"#);
    for (x, a) in &points {
        let px = sx(*x);
        let (ymin, ymax, ymean) = (sy(a.min), sy(a.max), sy(a.mean));
        let (ci_top, ci_bottom) = (sy(a.ci_high), sy(a.ci_low));
        let _ = writeln!(
            s,
            r#"<line class="whisker" x1="{px:.2}" y1="{ymin:.2}" x2="{px:.2}" y2="{ymax:.2}" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<rect class="ci" x="{:.2}" y="{ci_top:.2}" width="12.00" height="{:.2}" fill="steelblue" fill-opacity="0.4" stroke="steelblue"/>"#,
            px - 6.0,
            ci_bottom - ci_top
        );
        let _ = writeln!(
            s,
            r#"<circle class="mean" cx="{px:.2}" cy="{ymean:.2}" r="3.50" fill="black"/>"#
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

pub fn export_errorbar_svg(
    result: &SweepResult,
    metric: &str,
    path: &Path,
) -> Result<(), ExperimentError> {
    write_file(path, &render_errorbar_svg(result, metric)?)
}
