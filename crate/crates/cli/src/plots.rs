//! Small hand-written SVG figures. CSV files remain the reference output.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub label: String,
    /// `(level, value)`; plotted as `h = 2^-level` against `value`, both logarithmic.
    pub points: Vec<(u32, f64)>,
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = write!(out, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 15.0, escape(xlabel));
    let _ = write!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

/// Log-log plot of values against mesh size.
pub fn loglog(title: &str, ylabel: &str, series: &[Series]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|&(l, v)| (-(l as f64), v.log10()))
        .collect();
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "h", ylabel);
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (xmin, xmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let (ymin, ymax) = (ymin.floor(), ymax.ceil().max(ymin.floor() + 1.0));
    let (xmin, xmax) = (xmin - 0.25, xmax + 0.25);
    let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - ymin) / (ymax - ymin) * (H - TOP - BOTTOM);
    let mut level = xmin.ceil() as i64;
    while (level as f64) <= xmax {
        let x = sx(level as f64);
        let _ = write!(out, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, H - BOTTOM, H - BOTTOM + 5.0);
        let _ = write!(out, r#"<text x="{x}" y="{}" text-anchor="middle">2^{level}</text>"#, H - BOTTOM + 20.0);
        level += 1;
    }
    let mut dec = ymin as i64;
    while (dec as f64) <= ymax {
        let y = sy(dec as f64);
        let _ = write!(out, r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#, LEFT - 5.0);
        let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="end">1e{dec}</text>"#, LEFT - 8.0, y + 4.0);
        dec += 1;
    }
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        for &(l, v) in s.points.iter().filter(|(_, v)| *v > 0.0 && v.is_finite()) {
            let (x, y) = (sx(-(l as f64)), sy(v.log10()));
            let _ = write!(path, "{}{x:.2} {y:.2} ", if path.is_empty() { "M" } else { "L" });
            let _ = write!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        let _ = write!(out, r#"<path d="{}" stroke="{color}" fill="none"/>"#, path.trim_end());
        let ly = TOP + 15.0 + 16.0 * k as f64;
        let _ = write!(out, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, LEFT + 15.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart; `groups` are `(label, one value per category)`.
pub fn bars(title: &str, xlabel: &str, categories: &[String], groups: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, xlabel, "count");
    let ymax = groups.iter().flat_map(|(_, v)| v.iter().copied()).fold(1.0, f64::max);
    let slot = (W - LEFT - RIGHT) / categories.len().max(1) as f64;
    let bw = 0.8 * slot / groups.len().max(1) as f64;
    for (c, cat) in categories.iter().enumerate() {
        let x = LEFT + slot * (c as f64 + 0.5);
        let _ = write!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, H - BOTTOM + 20.0, escape(cat));
        for (g, (_, vals)) in groups.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0);
            let hgt = v / ymax * (H - TOP - BOTTOM - 20.0);
            let bx = LEFT + slot * c as f64 + 0.1 * slot + bw * g as f64;
            let _ = write!(
                out,
                r#"<rect x="{bx:.2}" y="{:.2}" width="{bw:.2}" height="{hgt:.2}" fill="{}"/>"#,
                H - BOTTOM - hgt,
                COLORS[g % COLORS.len()]
            );
        }
    }
    for (g, (label, _)) in groups.iter().enumerate() {
        let ly = TOP + 15.0 + 16.0 * g as f64;
        let _ = write!(out, r#"<text x="{}" y="{ly}" fill="{}">{}</text>"#, W - RIGHT - 150.0, COLORS[g % COLORS.len()], escape(label));
    }
    out.push_str("</svg>\n");
    out
}
