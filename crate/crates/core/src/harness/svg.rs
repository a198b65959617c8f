//! Minimal polyline charts.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line chart over x = 0..len with a log10 y axis. Non-positive or non-finite
/// values break the line.
pub fn log_line_chart(title: &str, x_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let finite = series
        .iter()
        .flat_map(|s| s.values.iter())
        .copied()
        .filter(|v| v.is_finite() && *v > 0.0);
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0)) } else { (0.0, 1.0) };
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(2);
    let px = |i: usize| m + (w - 2.0 * m) * i as f64 / (len - 1) as f64;
    let py = |v: f64| h - m - (h - 2.0 * m) * (v.log10() - lo) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, w / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(out, r#"<line x1="{m}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - m, w - m);
    let _ = writeln!(out, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    let mut decade = lo;
    while decade <= hi {
        let y = py(10f64.powf(decade));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">1e{}</text>"#, m - 4.0, y + 3.0, decade as i64);
        decade += 1.0;
    }
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(out, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, seg.join(" "));
            }
            seg.clear();
        };
        for (i, &v) in s.values.iter().enumerate() {
            if v.is_finite() && v > 0.0 {
                segment.push(format!("{:.2},{:.2}", px(i), py(v)));
            } else {
                flush(&mut segment, &mut out);
            }
        }
        flush(&mut segment, &mut out);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{colour}">{}</text>"#,
            w - m - 150.0,
            m + 14.0 * (k + 1) as f64,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
