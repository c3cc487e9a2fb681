//! Minimal static SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn frame(title: &str, x_label: &str, y_label: &str, (ylo, yhi): (f64, f64)) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - PAD, W - PAD, H - PAD);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{y_label}</text>"#, H / 2.0, H / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{ylo:.3}</text>"#, PAD - 4.0, H - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{yhi:.3}</text>"#, PAD - 4.0, PAD + 4.0);
    s
}

fn sx(v: f64, (lo, hi): (f64, f64)) -> f64 {
    PAD + (v - lo) / (hi - lo) * (W - 2.0 * PAD)
}

fn sy(v: f64, (lo, hi): (f64, f64)) -> f64 {
    H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD)
}

/// Line chart of `points` with an optional horizontal reference line.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], reference: Option<f64>) -> String {
    let xr = range(points.iter().map(|p| p.0));
    let yr = range(points.iter().map(|p| p.1).chain(reference));
    let mut s = frame(title, x_label, y_label, yr);
    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x, xr), sy(y, yr))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#, path.join(" "));
    if let Some(r) = reference {
        let y = sy(r, yr);
        let _ = writeln!(s, r#"<line x1="{PAD}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="firebrick" stroke-dasharray="6 4"/>"#, W - PAD);
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let yr = range(series.iter().flat_map(|(_, v)| v.iter().copied()).chain([0.0]));
    let mut s = frame(title, "", y_label, yr);
    let colors = ["steelblue", "firebrick", "seagreen", "darkorange"];
    let group = (W - 2.0 * PAD) / labels.len().max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    let zero = sy(0.0, yr);
    for (g, label) in labels.iter().enumerate() {
        let x0 = PAD + g as f64 * group + group * 0.1;
        for (k, (_, vals)) in series.iter().enumerate() {
            let y = sy(vals[g], yr);
            let (top, h) = if y < zero { (y, zero - y) } else { (zero, y - zero) };
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{top:.1}" width="{bar:.1}" height="{h:.1}" fill="{}"/>"#,
                x0 + k as f64 * bar,
                colors[k % colors.len()]
            );
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{label}</text>"#, x0 + group * 0.4, H - PAD + 14.0);
    }
    for (k, (name, _)) in series.iter().enumerate() {
        let y = 36.0 + 14.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/>"#, W - PAD - 110.0, y - 9.0, colors[k % colors.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{name}</text>"#, W - PAD - 96.0);
    }
    s.push_str("</svg>\n");
    s
}
