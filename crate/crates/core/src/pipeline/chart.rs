//! Control charts drawn from a saved [`ControlReport`].
//!
//! `render_charts` writes four SVG files next to each other: the two-panel
//! EVM control chart, the density view with anomaly contours and percentile
//! rectangles, the classification view and the regression view. A JSON twin
//! holds the report together with every annotation printed on the charts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Point;

use super::report::{BoundaryLines, ControlReport};
use super::svg::{escape, ramp, Frame, Svg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Element id of the annotation in the control chart.
    pub id: String,
    pub panel: String,
    pub text: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartFiles {
    pub control: String,
    pub density: String,
    pub classification: String,
    pub regression: String,
    pub twin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartTwin {
    pub report: ControlReport,
    pub annotations: Vec<Annotation>,
    pub files: ChartFiles,
}

/// Reads a report written by `analyze` and renders its charts, with the
/// control chart at `out` and the other files derived from its name.
pub fn cmd_chart(report: &Path, out: &Path) -> Result<ChartTwin> {
    let text = std::fs::read_to_string(report).map_err(|e| Error::io(report, e))?;
    let report: ControlReport = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{} is not a control report: {e}", report.display())))?;
    render_charts(&report, out)
}

fn sibling(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("chart");
    let name = if suffix.is_empty() {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}-{suffix}.{ext}")
    };
    out.with_file_name(name)
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

pub fn render_charts(report: &ControlReport, out: &Path) -> Result<ChartTwin> {
    let annotations = annotations(report);
    let files = ChartFiles {
        control: out.display().to_string(),
        density: sibling(out, "density", "svg").display().to_string(),
        classification: sibling(out, "classification", "svg").display().to_string(),
        regression: sibling(out, "regression", "svg").display().to_string(),
        twin: sibling(out, "", "json").display().to_string(),
    };
    write(out, &control_chart(report, &annotations))?;
    write(Path::new(&files.density), &density_chart(report))?;
    write(Path::new(&files.classification), &classification_chart(report))?;
    write(Path::new(&files.regression), &regression_chart(report))?;
    let twin = ChartTwin {
        report: report.clone(),
        annotations,
        files,
    };
    write(Path::new(&twin.files.twin), &(serde_json::to_string_pretty(&twin)? + "\n"))?;
    Ok(twin)
}

fn pct(p: f64) -> String {
    format!("{:.1}%", 100.0 * p)
}

fn signed(v: f64, digits: usize) -> String {
    format!("{v:+.digits$}")
}

fn annotations(r: &ControlReport) -> Vec<Annotation> {
    let b = &r.variability;
    let a = |id: &str, panel: &str, text: String, values: Vec<f64>| Annotation {
        id: id.into(),
        panel: panel.into(),
        text,
        values,
    };
    vec![
        a("p-anomaly-cost", "cost", format!("p(Anomaly) = {}", pct(r.p_anomaly)), vec![r.p_anomaly]),
        a("p-overcost", "cost", format!("p(OC) = {}", pct(r.p_overcost)), vec![r.p_overcost]),
        a(
            "expected-overcost",
            "cost",
            format!("Expected over-cost = {}", signed(r.expected_overcost, 1)),
            vec![r.expected_overcost],
        ),
        a(
            "variability-cost",
            "cost",
            format!("Expected AC range ({:.0}% HDR): {:.1} to {:.1}", 100.0 * b.level, b.c_lo, b.c_hi),
            vec![b.c_lo, b.c_hi],
        ),
        a("p-anomaly-time", "time", format!("p(Anomaly) = {}", pct(r.p_anomaly)), vec![r.p_anomaly]),
        a("p-delay", "time", format!("p(D) = {}", pct(r.p_delay)), vec![r.p_delay]),
        a(
            "expected-delay",
            "time",
            format!("Expected delay = {}", signed(r.expected_delay, 3)),
            vec![r.expected_delay],
        ),
        a(
            "variability-time",
            "time",
            format!("Expected AT range ({:.0}% HDR): {:.3} to {:.3}", 100.0 * b.level, b.t_lo, b.t_hi),
            vec![b.t_lo, b.t_hi],
        ),
    ]
}

const MARGIN_LEFT: f64 = 80.0;
const PLOT_WIDTH: f64 = 760.0;
const DIMMED: f64 = 0.25;

fn annotation_block(svg: &mut Svg, anns: &[Annotation], panel: &str, at: (f64, f64), dim: bool) {
    let mut y = at.1;
    for a in anns.iter().filter(|a| a.panel == panel) {
        let opacity = if dim && !a.id.starts_with("p-anomaly") && !a.id.starts_with("variability") {
            0.45
        } else {
            1.0
        };
        svg.raw(&format!(
            r#"<text id="{}" x="{:.2}" y="{y:.2}" font-size="12" opacity="{opacity}">{}</text>"#,
            escape(&a.id),
            at.0,
            escape(&a.text)
        ));
        y += 16.0;
    }
}

fn control_chart(r: &ControlReport, anns: &[Annotation]) -> String {
    let s = &r.status;
    let o = &r.overlays;
    let band = &r.variability;
    let pv_end = o.pv_curve.last().map_or(r.pd, |p| p.0);
    let t_max = [r.pd, pv_end, s.at, band.t_hi, r.expected_final_duration]
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
        * 1.08;
    let c_max = [r.bac, s.ac, s.ev, band.c_hi, r.expected_final_cost]
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
        * 1.1;
    let dim = !r.trust.predictions_trusted();
    let mut svg = Svg::new(920.0, 940.0);
    svg.text(
        (MARGIN_LEFT, 24.0),
        &format!("Control chart at EV = {:.1}% of BAC", 100.0 * r.ev_level),
        r#"font-size="15" font-weight="bold""#,
    );

    // cost panel
    let f = Frame::new(MARGIN_LEFT, 50.0, PLOT_WIDTH, 360.0, (0.0, t_max), (0.0, c_max));
    svg.open_group("cost-panel", "");
    f.axes(&mut svg, "time", "cost");
    let clip = f.clip(&mut svg);
    svg.open_group("cost-plot", &clip);
    svg.rect(
        f.px(band.t_lo),
        f.py(band.c_hi),
        f.px(band.t_hi) - f.px(band.t_lo),
        f.py(band.c_lo) - f.py(band.c_hi),
        r##"id="variability-band-cost" fill="#3182bd" fill-opacity="0.15" stroke="#3182bd""##,
    );
    draw_boundary(&mut svg, &f, &o.boundary_overcost, "boundary-overcost", "#d7191c");
    let pv: Vec<(f64, f64)> = o.pv_curve.iter().map(|&(t, v)| (f.px(t), f.py(v))).collect();
    svg.raw(r#"<g id="pv-curve">"#);
    svg.polyline(&pv, r##"stroke="#1f78b4" stroke-width="2""##);
    svg.close_group();
    svg.line((f.px(0.0), f.py(r.bac)), (f.px(t_max), f.py(r.bac)), r##"stroke="#555" stroke-dasharray="6 4""##);
    svg.line((f.px(r.pd), f.py(0.0)), (f.px(r.pd), f.py(c_max)), r##"stroke="#555" stroke-dasharray="6 4""##);
    svg.line(
        (f.px(s.at), f.py(s.ac)),
        (f.px(r.expected_final_duration), f.py(r.expected_final_cost)),
        r##"id="forecast-cost" stroke="#d95f02" stroke-dasharray="3 3""##,
    );
    svg.circle(
        (f.px(r.expected_final_duration), f.py(r.expected_final_cost)),
        5.0,
        r##"id="forecast-marker" fill="none" stroke="#d95f02" stroke-width="2""##,
    );
    svg.circle((f.px(s.at), f.py(s.ev)), 5.0, r##"id="ev-marker" fill="#33a02c""##);
    svg.circle((f.px(s.at), f.py(s.ac)), 5.0, r##"id="ac-marker" fill="#e31a1c""##);
    svg.close_group();
    svg.text((f.px(t_max) - 4.0, f.py(r.bac) - 4.0), "BAC", r#"font-size="11" text-anchor="end""#);
    svg.text((f.px(r.pd) + 4.0, f.top + 12.0), "PD", r#"font-size="11""#);
    svg.text((f.px(s.at) + 8.0, f.py(s.ev) + 4.0), "EV", r#"font-size="11""#);
    svg.text((f.px(s.at) + 8.0, f.py(s.ac) + 16.0), "AC", r#"font-size="11""#);
    annotation_block(&mut svg, anns, "cost", (f.left + 10.0, f.top + 18.0), dim);
    svg.close_group();

    // time panel: progress as a share of BAC
    let g = Frame::new(MARGIN_LEFT, 500.0, PLOT_WIDTH, 360.0, (0.0, t_max), (0.0, 110.0));
    let share = |v: f64| 100.0 * v / r.bac;
    svg.open_group("time-panel", "");
    g.axes(&mut svg, "time", "progress (% of BAC)");
    let clip = g.clip(&mut svg);
    svg.open_group("time-plot", &clip);
    let level = share(s.ev);
    svg.rect(
        g.px(band.t_lo),
        g.py(level + 3.0),
        g.px(band.t_hi) - g.px(band.t_lo),
        g.py(level - 3.0) - g.py(level + 3.0),
        r##"id="variability-band-time" fill="#3182bd" fill-opacity="0.15" stroke="#3182bd""##,
    );
    let pv: Vec<(f64, f64)> = o.pv_curve.iter().map(|&(t, v)| (g.px(t), g.py(share(v)))).collect();
    svg.raw(r#"<g id="pv-curve-time">"#);
    svg.polyline(&pv, r##"stroke="#1f78b4" stroke-width="2""##);
    svg.close_group();
    svg.line((g.px(r.pd), g.py(0.0)), (g.px(r.pd), g.py(110.0)), r##"stroke="#555" stroke-dasharray="6 4""##);
    svg.line((g.px(0.0), g.py(100.0)), (g.px(t_max), g.py(100.0)), r##"stroke="#555" stroke-dasharray="6 4""##);
    svg.line(
        (g.px(s.at), g.py(level)),
        (g.px(r.expected_final_duration), g.py(100.0)),
        r##"id="forecast-time" stroke="#d95f02" stroke-dasharray="3 3""##,
    );
    svg.circle(
        (g.px(r.expected_final_duration), g.py(100.0)),
        5.0,
        r##"id="forecast-finish" fill="none" stroke="#d95f02" stroke-width="2""##,
    );
    svg.circle((g.px(s.at), g.py(level)), 5.0, r##"id="ev-marker-time" fill="#33a02c""##);
    svg.close_group();
    svg.text((g.px(r.pd) + 4.0, g.top + 12.0), "PD", r#"font-size="11""#);
    annotation_block(&mut svg, anns, "time", (g.left + 10.0, g.top + 18.0), dim);
    svg.close_group();
    if dim {
        svg.text(
            (MARGIN_LEFT, 900.0),
            "Status lies outside the simulated region: over-run figures are extrapolated.",
            r##"id="untrusted-note" font-size="12" fill="#b00""##,
        );
    }
    svg.finish()
}

fn draw_boundary(svg: &mut Svg, f: &Frame, b: &BoundaryLines, id: &str, color: &str) {
    svg.open_group(id, "");
    for line in &b.all {
        let pts: Vec<(f64, f64)> = line.iter().map(|&p| f.map(p)).collect();
        svg.polyline(&pts, &format!(r#"stroke="{color}" stroke-width="1.5" stroke-opacity="{DIMMED}""#));
    }
    for line in &b.trusted {
        let pts: Vec<(f64, f64)> = line.iter().map(|&p| f.map(p)).collect();
        svg.polyline(&pts, &format!(r#"stroke="{color}" stroke-width="2""#));
    }
    svg.close_group();
}

fn plane_frame(r: &ControlReport, left: f64, top: f64, w: f64, h: f64) -> Frame {
    let g = &r.overlays.heat_grid;
    Frame::new(left, top, w, h, (g.x_min, g.x_max), (g.y_min, g.y_max))
}

fn status_marker(svg: &mut Svg, f: &Frame, r: &ControlReport) {
    svg.circle(
        f.map([r.status.at, r.status.ac]),
        6.0,
        r##"class="status" fill="none" stroke="black" stroke-width="2.5""##,
    );
}

fn density_chart(r: &ControlReport) -> String {
    let o = &r.overlays;
    let mut svg = Svg::new(960.0, 660.0);
    svg.text(
        (MARGIN_LEFT, 24.0),
        &format!("Anomaly contours at EV = {:.1}% of BAC", 100.0 * r.ev_level),
        r#"font-size="15" font-weight="bold""#,
    );
    let f = plane_frame(r, MARGIN_LEFT, 50.0, 700.0, 540.0);
    f.axes(&mut svg, "actual time", "actual cost");
    let clip = f.clip(&mut svg);
    svg.open_group("sample", &clip);
    for p in &o.sample {
        svg.circle(f.map([p.t, p.c]), 1.5, r##"fill="#777" fill-opacity="0.4""##);
    }
    svg.close_group();
    let colors = ["#1a9641", "#fdae61", "#d7191c"];
    for (k, c) in o.contours.iter().enumerate() {
        svg.open_group(&format!("contour-{}", c.anomaly), &clip);
        for line in &c.lines {
            let pts: Vec<(f64, f64)> = line.iter().map(|&p| f.map(p)).collect();
            svg.polyline(&pts, &format!(r#"stroke="{}" stroke-width="1.8""#, colors[k % colors.len()]));
        }
        svg.close_group();
    }
    for rect in &o.rectangles {
        svg.rect(
            f.px(rect.t_lo),
            f.py(rect.c_hi),
            f.px(rect.t_hi) - f.px(rect.t_lo),
            f.py(rect.c_lo) - f.py(rect.c_hi),
            &format!(
                r##"id="rectangle-{}" fill="none" stroke="#444" stroke-dasharray="5 3""##,
                rect.level
            ),
        );
    }
    status_marker(&mut svg, &f, r);
    let mut y = 70.0;
    for (k, c) in o.contours.iter().enumerate() {
        svg.text(
            (800.0, y),
            &format!("A = {}", c.anomaly),
            &format!(r#"font-size="12" fill="{}""#, colors[k % colors.len()]),
        );
        y += 16.0;
    }
    for rect in &o.rectangles {
        svg.text((800.0, y), &format!("{:.0}% box", 100.0 * rect.level), r#"font-size="12""#);
        y += 16.0;
    }
    svg.text(
        (800.0, y + 8.0),
        &format!("p(Anomaly) = {}", pct(r.p_anomaly)),
        r#"id="density-p-anomaly" font-size="12""#,
    );
    svg.finish()
}

/// Heat map over the report's heat grid; cells outside the training hull
/// are drawn faded.
fn heatmap(svg: &mut Svg, f: &Frame, r: &ControlReport, values: &[f64], range: (f64, f64), id: &str) {
    let g = &r.overlays.heat_grid;
    let (dx, dy) = (g.dx(), g.dy());
    let clip = f.clip(svg);
    svg.open_group(id, &clip);
    let span = range.1 - range.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = j * g.nx + i;
            let v = if span > 0.0 { (values[k] - range.0) / span } else { 0.5 };
            let opacity = if r.overlays.trusted_nodes[k] { 1.0 } else { DIMMED };
            let (x0, y0) = f.map([g.x(i) - dx / 2.0, g.y(j) + dy / 2.0]);
            let (x1, y1) = f.map([g.x(i) + dx / 2.0, g.y(j) - dy / 2.0]);
            svg.rect(
                x0,
                y0,
                x1 - x0 + 0.3,
                y1 - y0 + 0.3,
                &format!(r#"fill="{}" fill-opacity="{opacity}""#, ramp(v)),
            );
        }
    }
    svg.close_group();
}

fn hull_outline(svg: &mut Svg, f: &Frame, hull: &[Point]) {
    let mut pts: Vec<(f64, f64)> = hull.iter().map(|&p| f.map(p)).collect();
    if let Some(&first) = pts.first() {
        pts.push(first);
    }
    svg.polyline(&pts, r##"class="training-hull" stroke="#222" stroke-dasharray="2 3""##);
}

fn classification_chart(r: &ControlReport) -> String {
    let o = &r.overlays;
    let mut svg = Svg::new(1000.0, 860.0);
    svg.text(
        (MARGIN_LEFT, 24.0),
        &format!("Over-run classification at EV = {:.1}% of BAC", 100.0 * r.ev_level),
        r#"font-size="15" font-weight="bold""#,
    );
    let rows: [(&str, &str, &[f64], &BoundaryLines, f64, fn(&super::report::SamplePoint) -> bool); 2] = [
        ("overcost", "p(OC)", &o.p_overcost, &o.boundary_overcost, r.p_overcost, |p| p.over_budget),
        ("delay", "p(D)", &o.p_delay, &o.boundary_delay, r.p_delay, |p| p.late),
    ];
    for (row, (name, label, probs, boundary, p_status, label_of)) in rows.into_iter().enumerate() {
        let top = 50.0 + 400.0 * row as f64;
        let left = plane_frame(r, MARGIN_LEFT, top, 380.0, 330.0);
        left.axes(&mut svg, "actual time", "actual cost");
        let clip = left.clip(&mut svg);
        svg.open_group(&format!("labels-{name}"), &clip);
        for p in &o.sample {
            let color = if label_of(p) { "#d7191c" } else { "#1a9641" };
            svg.circle(left.map([p.t, p.c]), 1.6, &format!(r#"fill="{color}" fill-opacity="0.6""#));
        }
        svg.close_group();
        let right = plane_frame(r, 560.0, top, 380.0, 330.0);
        heatmap(&mut svg, &right, r, probs, (0.0, 1.0), &format!("probability-{name}"));
        right.axes(&mut svg, "actual time", "actual cost");
        let clip = right.clip(&mut svg);
        svg.open_group(&format!("boundary-{name}-panel"), &clip);
        draw_boundary(&mut svg, &right, boundary, &format!("decision-boundary-{name}"), "#000");
        hull_outline(&mut svg, &right, &o.hull);
        svg.close_group();
        status_marker(&mut svg, &right, r);
        svg.text(
            (560.0, top - 8.0),
            &format!("{label} at status = {}", pct(p_status)),
            &format!(r#"id="classification-{name}" font-size="12""#),
        );
    }
    svg.finish()
}

fn regression_chart(r: &ControlReport) -> String {
    let o = &r.overlays;
    let mut svg = Svg::new(1000.0, 860.0);
    svg.text(
        (MARGIN_LEFT, 24.0),
        &format!("Final cost and duration regression at EV = {:.1}% of BAC", 100.0 * r.ev_level),
        r#"font-size="15" font-weight="bold""#,
    );
    let rows: [(&str, &[f64], f64, fn(&super::report::SamplePoint) -> f64, String); 2] = [
        (
            "cost",
            &o.expected_final_cost,
            r.bac,
            |p| p.final_c,
            format!("Expected over-cost at status = {}", signed(r.expected_overcost, 1)),
        ),
        (
            "duration",
            &o.expected_final_duration,
            r.pd,
            |p| p.final_t,
            format!("Expected delay at status = {}", signed(r.expected_delay, 3)),
        ),
    ];
    for (row, (name, values, baseline, value_of, caption)) in rows.into_iter().enumerate() {
        let top = 50.0 + 400.0 * row as f64;
        let sample: Vec<f64> = o.sample.iter().map(value_of).collect();
        // symmetric around the baseline so that green means under plan
        let reach = sample
            .iter()
            .chain(values.iter())
            .map(|v| (v - baseline).abs())
            .fold(0.0f64, f64::max)
            .max(1e-9);
        let range = (baseline - reach, baseline + reach);
        let left = plane_frame(r, MARGIN_LEFT, top, 380.0, 330.0);
        left.axes(&mut svg, "actual time", "actual cost");
        let clip = left.clip(&mut svg);
        svg.open_group(&format!("final-{name}"), &clip);
        for (p, v) in o.sample.iter().zip(&sample) {
            svg.circle(
                left.map([p.t, p.c]),
                1.6,
                &format!(r#"fill="{}""#, ramp((v - range.0) / (range.1 - range.0))),
            );
        }
        svg.close_group();
        let right = plane_frame(r, 560.0, top, 380.0, 330.0);
        heatmap(&mut svg, &right, r, values, range, &format!("expected-{name}"));
        right.axes(&mut svg, "actual time", "actual cost");
        let clip = right.clip(&mut svg);
        svg.open_group(&format!("hull-{name}"), &clip);
        hull_outline(&mut svg, &right, &o.hull);
        svg.close_group();
        status_marker(&mut svg, &right, r);
        svg.text((560.0, top - 8.0), &caption, &format!(r#"id="regression-{name}" font-size="12""#));
    }
    svg.finish()
}
