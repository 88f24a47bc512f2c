//! CSV tables and small self-contained SVG line charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{CurvePoint, RegretReport};
use super::scenario::Scenario;
use crate::error::Result;

/// One `(x, series, mean, stderr)` row.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub series: String,
    pub mean: f64,
    pub stderr: f64,
}

pub fn csv_string(points: &[SeriesPoint]) -> String {
    let mut out = String::from("x,policy,mean,stderr\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.x, p.series, p.mean, p.stderr);
    }
    out
}

/// Line chart with one polyline per series, in first-appearance order.
pub fn svg_string(title: &str, x_label: &str, points: &[SeriesPoint]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 160.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    const COLORS: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    ];

    let finite: Vec<&SeriesPoint> = points
        .iter()
        .filter(|p| p.x.is_finite() && p.mean.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in &finite {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.mean);
        y1 = y1.max(p.mean);
    }
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut series: Vec<&str> = Vec::new();
    for p in &finite {
        if !series.contains(&p.series.as_str()) {
            series.push(&p.series);
        }
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (ax0, ax1, ay0, ay1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<path d="M{ax0},{ay0} L{ax0},{ay1} L{ax1},{ay1}" fill="none" stroke="black"/>"#
    );
    for (value, anchor_y) in [(y0, ay1), (y1, ay0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            ax0 - 6.0,
            anchor_y + 4.0,
            tick(value)
        );
    }
    for (value, anchor_x) in [(x0, ax0), (x1, ax1)] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{}</text>"#,
            ay1 + 16.0,
            tick(value)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    for (i, name) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = finite
            .iter()
            .filter(|p| p.series == *name)
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            ax1 + 10.0,
            ax1 + 28.0,
            ax1 + 32.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn curve(points: &[CurvePoint], series: &str) -> Vec<SeriesPoint> {
    points
        .iter()
        .map(|p| SeriesPoint {
            x: p.t as f64,
            series: series.to_string(),
            mean: p.value.mean,
            stderr: p.value.stderr,
        })
        .collect()
}

/// Write `<stem>.csv` and `<stem>.svg` into `dir`.
pub fn write_figure(
    dir: &Path,
    stem: &str,
    title: &str,
    x_label: &str,
    points: &[SeriesPoint],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let svg = dir.join(format!("{stem}.svg"));
    std::fs::write(&csv, csv_string(points))?;
    std::fs::write(&svg, svg_string(title, x_label, points))?;
    Ok(vec![csv, svg])
}

/// Emit every figure the report supports. Sweep reports give regret against
/// the swept parameter; single-point reports give trajectories.
pub fn emit_figures(
    report: &RegretReport,
    scenario: &Scenario,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if report.is_empty() {
        return Ok(written);
    }
    if let Some(param) = &report.sweep_param {
        // First listed window size per (x, policy).
        let mut seen: Vec<(Option<f64>, &str)> = Vec::new();
        let mut points = Vec::new();
        for r in &report.rows {
            if seen.contains(&(r.x, r.policy.as_str())) {
                continue;
            }
            seen.push((r.x, &r.policy));
            points.push(SeriesPoint {
                x: r.x.unwrap_or(f64::NAN),
                series: r.policy.clone(),
                mean: r.regret.mean,
                stderr: r.regret.stderr,
            });
        }
        let stem = scenario.figure_name("sweep");
        written.extend(write_figure(
            dir,
            &stem,
            &format!("{}: regret vs {param}", report.scenario),
            param,
            &points,
        )?);
        if !report.gaps.is_empty() {
            let points: Vec<SeriesPoint> = report
                .gaps
                .iter()
                .map(|g| SeriesPoint {
                    x: g.x.unwrap_or(f64::NAN),
                    series: g.label.clone(),
                    mean: g.gap.mean,
                    stderr: g.gap.stderr,
                })
                .collect();
            let stem = scenario.figure_name("gap");
            written.extend(write_figure(
                dir,
                &stem,
                &format!("{}: paired regret gap", report.scenario),
                param,
                &points,
            )?);
        }
        return Ok(written);
    }

    let regret: Vec<SeriesPoint> = report
        .diagnostics
        .iter()
        .flat_map(|d| curve(&d.regret_curve, &d.policy))
        .collect();
    let stem = scenario.figure_name("regret_curve");
    written.extend(write_figure(
        dir,
        &stem,
        &format!("{}: Reg(1, t)", report.scenario),
        "t",
        &regret,
    )?);

    let by_type = |pick: &dyn Fn(&super::experiment::Diagnostics) -> &Vec<Vec<CurvePoint>>| -> Vec<SeriesPoint> {
        report
            .diagnostics
            .iter()
            .flat_map(|d| {
                pick(d)
                    .iter()
                    .enumerate()
                    .flat_map(|(k, c)| curve(c, &format!("{}:type{}", d.policy, k + 1)))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let reviewed = by_type(&|d| &d.reviewed_curve);
    let stem = scenario.figure_name("reviewed");
    written.extend(write_figure(
        dir,
        &stem,
        &format!("{}: reviewed posts", report.scenario),
        "t",
        &reviewed,
    )?);
    let queue = by_type(&|d| &d.queue_curve);
    let stem = scenario.figure_name("queue");
    written.extend(write_figure(
        dir,
        &stem,
        &format!("{}: queue length", report.scenario),
        "t",
        &queue,
    )?);

    let confidence: Vec<SeriesPoint> = report
        .diagnostics
        .iter()
        .flat_map(|d| {
            d.confidence_curve
                .iter()
                .enumerate()
                .flat_map(|(k, c)| {
                    let lo: Vec<CurvePoint> = c.iter().map(|(lo, _)| lo.clone()).collect();
                    let hi: Vec<CurvePoint> = c.iter().map(|(_, hi)| hi.clone()).collect();
                    let mut out = curve(&lo, &format!("{}:h_lo:type{}", d.policy, k + 1));
                    out.extend(curve(&hi, &format!("{}:h_hi:type{}", d.policy, k + 1)));
                    out
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if !confidence.is_empty() {
        let stem = scenario.figure_name("confidence");
        written.extend(write_figure(
            dir,
            &stem,
            &format!("{}: confidence bounds on h", report.scenario),
            "t",
            &confidence,
        )?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_csv() {
        let csv = csv_string(&[SeriesPoint {
            x: 50.0,
            series: "bacid".into(),
            mean: 1.5,
            stderr: 0.25,
        }]);
        assert_eq!(csv, "x,policy,mean,stderr\n50,bacid,1.5,0.25\n");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let pts = vec![
            SeriesPoint {
                x: 1.0,
                series: "a".into(),
                mean: 0.0,
                stderr: 0.0,
            },
            SeriesPoint {
                x: 2.0,
                series: "a".into(),
                mean: 1.0,
                stderr: 0.0,
            },
            SeriesPoint {
                x: 1.0,
                series: "b<c".into(),
                mean: 2.0,
                stderr: 0.0,
            },
        ];
        let svg = svg_string("t", "x", &pts);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
    }
}
