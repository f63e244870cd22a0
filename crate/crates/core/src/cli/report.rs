//! CSV tables, SVG line charts and console summaries.
//!
//! Floats are written with `{:.16e}` (17 significant digits), which
//! round-trips every `f64` and does not depend on the locale.

use std::fmt::Write as _;

use crate::sim::{ExperimentResult, MonteCarloSummary};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-step series of one experiment, one row per estimate.
pub fn result_csv(result: &ExperimentResult) -> String {
    let mut header = vec![
        "step".to_string(),
        "truth_x1_ft".into(),
        "truth_x2_ftps".into(),
        "truth_x3_slugpft2".into(),
        "z_ft".into(),
    ];
    for s in &result.filters {
        let f = s.kind.name();
        header.extend([
            format!("{f}_est_x1_ft"),
            format!("{f}_est_x2_ftps"),
            format!("{f}_est_x3_slugpft2"),
            format!("{f}_err_truth_ft"),
            format!("{f}_err_meas_ft"),
            format!("{f}_sq_err_ft2"),
        ]);
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, truth) in result.truth.iter().enumerate() {
        let mut row = vec![(k + 1).to_string()];
        row.extend(truth.iter().map(|v| num(*v)));
        row.push(num(result.measurements[k]));
        for s in &result.filters {
            row.extend(s.estimates[k].iter().map(|v| num(*v)));
            row.push(num(s.err_truth[k]));
            row.push(num(s.err_meas[k]));
            row.push(num(s.sq_err[k]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn mc_summary_csv(summary: &MonteCarloSummary) -> String {
    let mut out = String::from("filter,mean_mse_ft2,stderr_ft2,diverged_count\n");
    for f in &summary.filters {
        let _ = writeln!(out, "{},{},{},{}", f.kind.name(), num(f.mean_mse), num(f.stderr), f.diverged);
    }
    out
}

pub fn mse_table(result: &ExperimentResult) -> String {
    let mut out = format!("{:<6} {:>16} {:>8}\n", "filter", "mse_ft2", "jitter");
    for s in &result.filters {
        let _ = writeln!(out, "{:<6} {:>16.4} {:>8}", s.kind.name(), s.mse(), s.jitter_count);
    }
    out
}

pub fn mc_table(summary: &MonteCarloSummary) -> String {
    let mut out = format!(
        "{:<6} {:>16} {:>12} {:>9} {:>8}\n",
        "filter", "mean_mse_ft2", "stderr", "diverged", "jitter"
    );
    for f in &summary.filters {
        let _ = writeln!(
            out,
            "{:<6} {:>16.4} {:>12.4} {:>9} {:>8}",
            f.kind.name(),
            f.mean_mse,
            f.stderr,
            f.diverged,
            f.jitter_count
        );
    }
    out
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart of `series` against the step numbers `1..=len`.
pub fn line_chart(title: &str, y_label: &str, series: &[(&str, &[f64])]) -> String {
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let plot_w = WIDTH - left - right;
    let plot_h = HEIGHT - top - bottom;
    let len = series.iter().map(|(_, ys)| ys.len()).max().unwrap_or(0);
    let finite = series.iter().flat_map(|(_, ys)| ys.iter().copied()).filter(|y| y.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo <= 0.0 {
        (lo, hi) = (lo - 1.0, hi + 1.0);
    }
    let x_span = (len.max(2) - 1) as f64;
    let px = |i: usize| left + plot_w * i as f64 / x_span;
    let py = |y: f64| top + plot_h * (hi - y) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for t in 0..=4 {
        let y = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(y) + 4.0,
            tick(y)
        );
    }
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            py(0.0),
            left + plot_w
        );
    }
    for i in 0..len {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(i),
            top + plot_h + 16.0,
            i + 1
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">step</text>"#,
        left + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
        top + plot_h / 2.0,
        escape(y_label)
    );
    for (j, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .filter(|(_, y)| y.is_finite())
            .map(|(i, y)| format!("{:.2},{:.2}", px(i), py(*y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 16.0 * j as f64;
        let lx = left + plot_w - 90.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 20.0
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 26.0, escape(name));
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(y: f64) -> String {
    if y != 0.0 && (y.abs() >= 1e5 || y.abs() < 1e-2) {
        format!("{y:.2e}")
    } else {
        format!("{y:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn errors_svg(result: &ExperimentResult) -> String {
    let series: Vec<(&str, &[f64])> = result
        .filters
        .iter()
        .map(|s| (s.kind.name(), s.err_truth.as_slice()))
        .collect();
    line_chart("Position error against truth", "x̂₁ − x₁ (ft)", &series)
}

pub fn mse_svg(result: &ExperimentResult) -> String {
    let series: Vec<(&str, &[f64])> = result
        .filters
        .iter()
        .map(|s| (s.kind.name(), s.sq_err.as_slice()))
        .collect();
    line_chart("Squared position error", "(x̂₁ − x₁)² (ft²)", &series)
}
