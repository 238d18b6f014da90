//! X-Y centroid scatter as a standalone SVG document.

use std::fmt::Write;

use super::{PointSet, Units};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

/// One circle per centroid, one color per series. Pixel series are
/// converted with `um_per_px` when given; otherwise they are drawn as-is
/// and labelled `(px)`. The image Y axis points down, as in the data.
pub fn scatter_svg(series: &[(String, PointSet)], um_per_px: Option<f64>) -> String {
    let series: Vec<(String, Vec<[f64; 3]>)> = series
        .iter()
        .map(|(name, set)| match (set.units, um_per_px) {
            (Units::Pixels, Some(f)) if f > 0.0 => (
                name.clone(),
                set.points
                    .iter()
                    .map(|p| [p[0] * f, p[1] * f, p[2]])
                    .collect(),
            ),
            (Units::Pixels, _) => (format!("{name} (px)"), set.points.clone()),
            (Units::Microns, _) => (name.clone(), set.points.clone()),
        })
        .collect();

    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (_, pts) in &series {
        for p in pts {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 == 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 == 0.0 {
        y1 = y0 + 1.0;
    }
    let sx = (WIDTH - 2.0 * MARGIN) / (x1 - x0);
    let sy = (HEIGHT - 2.0 * MARGIN) / (y1 - y0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">X ({x0:.2} to {x1:.2})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {})">Y ({y0:.2} to {y1:.2})</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<g fill="{color}" fill-opacity="0.7">"#);
        for p in pts {
            let cx = MARGIN + (p[0] - x0) * sx;
            let cy = MARGIN + (p[1] - y0) * sy;
            let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3"/>"#);
        }
        let _ = writeln!(s, "</g>");
        let ly = MARGIN + 15.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly:.0}" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 5.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
