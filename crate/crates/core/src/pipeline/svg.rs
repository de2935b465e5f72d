//! Minimal SVG document builder with linear plot frames.

use std::fmt::Write;

use crate::linalg::Point;

pub struct Svg {
    width: f64,
    height: f64,
    defs: String,
    body: String,
    clips: usize,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            defs: String::new(),
            body: String::new(),
            clips: 0,
        }
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn open_group(&mut self, id: &str, attrs: &str) {
        self.raw(&format!(r#"<g id="{}" {attrs}>"#, escape(id)));
    }

    pub fn close_group(&mut self) {
        self.raw("</g>");
    }

    /// Registers a clip rectangle and returns the attribute that applies it.
    pub fn clip(&mut self, x: f64, y: f64, w: f64, h: f64) -> String {
        self.clips += 1;
        let id = format!("clip{}", self.clips);
        let _ = writeln!(
            self.defs,
            r#"<clipPath id="{id}"><rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}"/></clipPath>"#
        );
        format!(r#"clip-path="url(#{id})""#)
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), style: &str) {
        self.raw(&format!(
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#,
            a.0, a.1, b.0, b.1
        ));
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], style: &str) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        self.raw(&format!(r#"<polyline points="{}" fill="none" {style}/>"#, d.trim_end()));
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str) {
        self.raw(&format!(
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
            w.max(0.0),
            h.max(0.0)
        ));
    }

    pub fn circle(&mut self, c: (f64, f64), r: f64, style: &str) {
        self.raw(&format!(
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" {style}/>"#,
            c.0, c.1
        ));
    }

    pub fn text(&mut self, at: (f64, f64), content: &str, style: &str) {
        self.raw(&format!(
            r#"<text x="{:.2}" y="{:.2}" {style}>{}</text>"#,
            at.0,
            at.1,
            escape(content)
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<defs>\n{}</defs>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.defs,
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Maps data coordinates onto a pixel rectangle (y grows upwards in data).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn new(left: f64, top: f64, width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |r: (f64, f64)| {
            if r.1 > r.0 {
                r
            } else {
                let pad = 0.5 * r.0.abs().max(1.0);
                (r.0 - pad, r.1 + pad)
            }
        };
        Self {
            left,
            top,
            width,
            height,
            x: widen(x),
            y: widen(y),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    pub fn map(&self, p: Point) -> (f64, f64) {
        (self.px(p[0]), self.py(p[1]))
    }

    pub fn clip(&self, svg: &mut Svg) -> String {
        svg.clip(self.left, self.top, self.width, self.height)
    }

    /// Frame border, ticks and axis labels.
    pub fn axes(&self, svg: &mut Svg, x_label: &str, y_label: &str) {
        svg.rect(self.left, self.top, self.width, self.height, r##"fill="none" stroke="#333""##);
        for v in ticks(self.x) {
            let x = self.px(v);
            svg.line((x, self.top + self.height), (x, self.top + self.height + 4.0), r##"stroke="#333""##);
            svg.text(
                (x, self.top + self.height + 16.0),
                &tick_label(v),
                r#"font-size="10" text-anchor="middle""#,
            );
        }
        for v in ticks(self.y) {
            let y = self.py(v);
            svg.line((self.left - 4.0, y), (self.left, y), r##"stroke="#333""##);
            svg.text((self.left - 6.0, y + 3.0), &tick_label(v), r#"font-size="10" text-anchor="end""#);
        }
        svg.text(
            (self.left + self.width / 2.0, self.top + self.height + 32.0),
            x_label,
            r#"font-size="12" text-anchor="middle""#,
        );
        let (lx, ly) = (self.left - 52.0, self.top + self.height / 2.0);
        svg.text(
            (lx, ly),
            y_label,
            &format!(r#"font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})""#),
        );
    }
}

/// Roughly five round tick values inside `range`.
fn ticks(range: (f64, f64)) -> Vec<f64> {
    let span = range.1 - range.0;
    if !(span > 0.0 && span.is_finite()) {
        return Vec::new();
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut v = (range.0 / step).ceil() * step;
    let mut out = Vec::new();
    while v <= range.1 + 1e-9 * step {
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e6 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.3e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

/// Green to yellow to red as `v` goes from 0 to 1.
pub fn ramp(v: f64) -> String {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.5 };
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    let (lo, hi, s) = if v < 0.5 {
        ((26.0, 150.0, 65.0), (255.0, 255.0, 191.0), v / 0.5)
    } else {
        ((255.0, 255.0, 191.0), (215.0, 25.0, 28.0), (v - 0.5) / 0.5)
    };
    format!(
        "rgb({},{},{})",
        lerp(lo.0, hi.0, s),
        lerp(lo.1, hi.1, s),
        lerp(lo.2, hi.2, s)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks((0.0, 24613.0));
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.iter().all(|v| *v <= 24613.0));
        assert!(t.windows(2).all(|w| (w[1] - w[0] - 5000.0).abs() < 1e-9));
    }

    #[test]
    fn frame_maps_corners() {
        let f = Frame::new(10.0, 20.0, 100.0, 50.0, (0.0, 1.0), (0.0, 2.0));
        assert_eq!(f.map([0.0, 0.0]), (10.0, 70.0));
        assert_eq!(f.map([1.0, 2.0]), (110.0, 20.0));
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "rgb(26,150,65)");
        assert_eq!(ramp(1.0), "rgb(215,25,28)");
    }
}
