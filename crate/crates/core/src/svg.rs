//! Minimal deterministic SVG writer for stage visualizations: layout
//! overlays, recovered traces, velocity profiles and model reconstructions.
//! Coordinates are written with fixed precision so identical inputs give
//! byte-identical files.

use crate::geometry::{Point, Region};

pub struct SvgDoc {
    width: f64,
    height: f64,
    body: String,
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> Self {
        SvgDoc {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, r: &Region, stroke: &str, label: Option<&str>) {
        self.body.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\"/>\n",
            r.x0,
            r.y0,
            r.width(),
            r.height(),
            stroke
        ));
        if let Some(text) = label {
            self.body.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{}\">{}</text>\n",
                r.x0,
                r.y0.saturating_sub(2),
                stroke,
                text
            ));
        }
    }

    pub fn polyline(&mut self, pts: &[Point], stroke: &str, width: f64) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", p.x, p.y)).collect();
        self.body.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.2}\"/>\n",
            coords.join(" "),
            stroke,
            width
        ));
    }

    pub fn circle(&mut self, center: Point, r: f64, fill: &str) {
        self.body.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{}\"/>\n",
            center.x, center.y, r, fill
        ));
    }

    pub fn text(&mut self, at: Point, size: f64, content: &str) {
        self.body.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"{:.1}\">{}</text>\n",
            at.x, at.y, size, content
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.2} {:.2}\">\n{}</svg>\n",
            self.width, self.height, self.body
        )
    }
}

/// Trace plot: one polyline per stroke, alternating palette, dots on stroke
/// starts.
pub fn trace_svg(points: &[Point], breaks: &[usize], width: f64, height: f64) -> String {
    const PALETTE: [&str; 4] = ["#1965b0", "#dc050c", "#4eb265", "#f7a600"];
    let mut doc = SvgDoc::new(width, height);
    let trace = crate::recovery::OrderedTrace {
        points: points.to_vec(),
        breaks: breaks.to_vec(),
    };
    for (i, (s, e)) in trace.stroke_ranges().iter().enumerate() {
        let stroke = PALETTE[i % PALETTE.len()];
        doc.polyline(&points[*s..*e], stroke, 1.0);
        doc.circle(points[*s], 2.0, stroke);
    }
    doc.finish()
}

/// Velocity plot: measured profile plus an optional rebuilt curve, scaled
/// into a fixed-height chart.
pub fn velocity_svg(measured: &[f64], rebuilt: Option<&[f64]>) -> String {
    let w = measured.len().max(2) as f64;
    let h = 120.0;
    let vmax = measured
        .iter()
        .chain(rebuilt.unwrap_or(&[]).iter())
        .cloned()
        .fold(1e-12f64, f64::max);
    let to_pts = |v: &[f64]| -> Vec<Point> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| Point::new(i as f64, h - x / vmax * (h - 10.0) - 5.0))
            .collect()
    };
    let mut doc = SvgDoc::new(w, h);
    doc.polyline(&to_pts(measured), "#1965b0", 1.0);
    if let Some(r) = rebuilt {
        doc.polyline(&to_pts(r), "#dc050c", 1.0);
    }
    doc.finish()
}
