//! Minimal standalone SVG writers for heatmaps, time lines and curves.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, width: f64, height: f64, comment: Option<&str>, title: &str) {
    if let Some(c) = comment {
        // `--` may not appear inside an XML comment.
        let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
    }
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
}

/// Blue-to-red color ramp for `t ∈ [0, 1]`.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap of a row-major matrix; row 0 is drawn at the bottom.
pub fn heatmap(rows: usize, cols: usize, values: &[f64], title: &str, comment: Option<&str>) -> String {
    assert_eq!(values.len(), rows * cols, "heatmap shape");
    let side = 480.0;
    let mut out = String::new();
    open(&mut out, side + 2.0 * MARGIN, side + 2.0 * MARGIN, comment, title);
    let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let (cw, ch) = (side / cols as f64, side / rows as f64);
    for i in 0..rows {
        for j in 0..cols {
            let v = values[i * cols + j];
            let t = if max > 0.0 { v / max } else { 0.0 };
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                MARGIN + j as f64 * cw,
                MARGIN + side - (i + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                ramp(t)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// A shaded index range `[start, end]` on a time line.
#[derive(Debug, Clone)]
pub struct Shade {
    pub start: usize,
    pub end: usize,
    pub color: &'static str,
}

/// Time line of `values` with shaded intervals and a dashed reference level.
pub fn timeline(labels: &[String], values: &[f64], shades: &[Shade], reference: Option<f64>, title: &str, comment: Option<&str>) -> String {
    assert_eq!(labels.len(), values.len(), "timeline shape");
    let mut out = String::new();
    open(&mut out, WIDTH, HEIGHT, comment, title);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let mut lo = finite.iter().copied().fold(f64::INFINITY, f64::min).min(reference.unwrap_or(f64::INFINITY));
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(reference.unwrap_or(f64::NEG_INFINITY));
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo <= 0.0 {
        hi = lo + 1.0;
    }
    let n = values.len().max(2);
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v.clamp(lo, hi) - lo) / (hi - lo);
    for s in shades {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{MARGIN}" width="{:.2}" height="{}" fill="{}" fill-opacity="0.5"/>"#,
            x(s.start),
            (x(s.end) - x(s.start)).max(1.0),
            HEIGHT - 2.0 * MARGIN,
            s.color
        );
    }
    if let Some(r) = reference {
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            WIDTH - MARGIN,
            y(r),
            y(r)
        );
    }
    let mut path = String::new();
    for (i, v) in values.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(path, "{cmd}{:.2},{:.2} ", x(i), y(*v));
    }
    let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="black" stroke-width="1"/>"#, path.trim_end());
    if let (Some(first), Some(last)) = (labels.first(), labels.last()) {
        let _ = writeln!(out, r#"<text x="{MARGIN}" y="{}">{}</text>"#, HEIGHT - MARGIN + 16.0, escape(first));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            HEIGHT - MARGIN + 16.0,
            escape(last)
        );
    }
    let _ = writeln!(out, r#"<text x="4" y="{MARGIN}">{hi:.3}</text>"#);
    let _ = writeln!(out, r#"<text x="4" y="{}">{lo:.3}</text>"#, HEIGHT - MARGIN);
    out.push_str("</svg>\n");
    out
}

/// Overlaid curves `(label, points)` on shared axes.
pub fn curves(series: &[(String, Vec<(f64, f64)>)], title: &str, comment: Option<&str>) -> String {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let mut out = String::new();
    open(&mut out, WIDTH, HEIGHT, comment, title);
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(a, b)| a.is_finite() && b.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(a, b) in pts {
        x0 = x0.min(a);
        x1 = x1.max(a);
        y0 = y0.min(b);
        y1 = y1.max(b);
    }
    if !(x1 > x0) {
        (x0, x1) = (0.0, 1.0);
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let x = |a: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * (a - x0) / (x1 - x0);
    let y = |b: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (b - y0) / (y1 - y0);
    for (k, (label, points)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        for (i, &(a, b)) in points.iter().filter(|(a, b)| a.is_finite() && b.is_finite()).enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2},{:.2} ", x(a), y(b));
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.trim_end());
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 140.0,
            MARGIN + 16.0 * (k + 1) as f64,
            escape(label)
        );
    }
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{}">{x0:.3}</text>"#, HEIGHT - MARGIN + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_comes_first_and_document_closes() {
        let s = heatmap(2, 2, &[0.1, 0.2, 0.3, 0.4], "t", Some("config-hash: ab--cd"));
        assert!(s.starts_with("<!-- config-hash: ab- -cd -->"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect").count(), 5);
    }

    #[test]
    fn timeline_handles_infinite_values() {
        let labels: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let s = timeline(&labels, &[0.5, f64::INFINITY, 2.0], &[Shade { start: 0, end: 1, color: "red" }], Some(1.0), "x<y", None);
        assert!(s.contains("x&lt;y") && !s.contains("NaN") && !s.contains("inf"));
    }

    #[test]
    fn curves_render_each_series() {
        let s = curves(&[("a".into(), vec![(0.0, 1.0), (1.0, 2.0)]), ("b".into(), vec![(0.0, 0.0)])], "c", None);
        assert_eq!(s.matches("<path").count(), 2);
    }
}
