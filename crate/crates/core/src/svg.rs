//! SVG overlay of a microstructure with predicted cracks.

use std::fmt::Write;

use crate::analysis::ConfidenceRegion;
use crate::geometry::{Microstructure, Point2};
use crate::prediction::CrackPath;

const PIXELS_PER_METER: f64 = 2000.0;

pub struct Overlay<'a> {
    pub microstructure: &'a Microstructure,
    pub paths: &'a [CrackPath],
    pub median: Option<&'a CrackPath>,
    pub region: Option<&'a ConfidenceRegion>,
}

fn xy(m: &Microstructure, p: Point2) -> (f64, f64) {
    (p.x * PIXELS_PER_METER, (m.height - p.y) * PIXELS_PER_METER)
}

fn points_attr(m: &Microstructure, pts: impl IntoIterator<Item = Point2>) -> String {
    let mut s = String::new();
    for p in pts {
        let (x, y) = xy(m, p);
        let _ = write!(s, "{x:.3},{y:.3} ");
    }
    s.pop();
    s
}

pub fn render(o: &Overlay) -> String {
    let m = o.microstructure;
    let (w, h) = (m.width * PIXELS_PER_METER, m.height * PIXELS_PER_METER);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect width="{w:.3}" height="{h:.3}" fill="#f4f1ea" stroke="#000"/>"##
    );
    let _ = writeln!(
        s,
        r##"<g fill="#9a9a9a" stroke="#555" stroke-width="0.5">"##
    );
    for a in &m.aggregates {
        let _ = writeln!(
            s,
            r#"<polygon points="{}"/>"#,
            points_attr(m, a.vertices.iter().copied())
        );
    }
    s.push_str("</g>\n");
    if let Some(r) = o.region {
        let lower = r
            .grid
            .iter()
            .zip(&r.lower)
            .map(|(&x, &y)| Point2::new(x, y));
        let upper = r
            .grid
            .iter()
            .zip(&r.upper)
            .rev()
            .map(|(&x, &y)| Point2::new(x, y));
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#3b7dd8" fill-opacity="0.25" stroke="none"/>"##,
            points_attr(m, lower.chain(upper))
        );
    }
    s.push_str(r##"<g fill="none" stroke="#d07a1c" stroke-width="0.6" stroke-opacity="0.5">"##);
    s.push('\n');
    for p in o.paths {
        let _ = writeln!(
            s,
            r#"<polyline points="{}"/>"#,
            points_attr(m, p.points.iter().copied())
        );
    }
    s.push_str("</g>\n");
    if let Some(p) = o.median {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#b00020" stroke-width="2"/>"##,
            points_attr(m, p.points.iter().copied())
        );
    }
    s.push_str("</svg>\n");
    s
}
