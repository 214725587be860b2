//! Static SVG line and bar charts. CSV stays the source of truth.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, y: (f64, f64)) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>
<text x="{}" y="{}" text-anchor="end">{:.3}</text>
<text x="{}" y="{}" text-anchor="end">{:.3}</text>
"#,
        W / 2.0,
        escape(title),
        H - MARGIN,
        W - MARGIN,
        H - MARGIN,
        H - MARGIN,
        W / 2.0,
        H - 12.0,
        escape(x_label),
        H / 2.0,
        H / 2.0,
        escape(y_label),
        MARGIN - 4.0,
        H - MARGIN,
        y.0,
        MARGIN - 4.0,
        MARGIN + 4.0,
        y.1,
    );
}

fn sx(x: f64, b: (f64, f64)) -> f64 {
    MARGIN + (x - b.0) / (b.1 - b.0) * (W - 2.0 * MARGIN)
}

fn sy(y: f64, b: (f64, f64)) -> f64 {
    H - MARGIN - (y - b.0) / (b.1 - b.0) * (H - 2.0 * MARGIN)
}

/// One polyline per named series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let xb = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let yb = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, yb);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" text-anchor="middle">{:.3}</text><text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#,
        H - MARGIN + 16.0,
        xb.0,
        W - MARGIN,
        H - MARGIN + 16.0,
        xb.1
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x, xb), sy(y, yb)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN - 120.0,
            MARGIN + 14.0 * i as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars from zero.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let yb = bounds(bars.iter().map(|b| b.1).chain([0.0]));
    let mut out = String::new();
    frame(&mut out, title, "", y_label, yb);
    let slot = (W - 2.0 * MARGIN) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = MARGIN + slot * i as f64 + slot * 0.15;
        let (top, bottom) = (sy(v.max(0.0), yb), sy(v.min(0.0), yb));
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            slot * 0.7,
            bottom - top,
            COLORS[i % COLORS.len()],
            x + slot * 0.35,
            H - MARGIN + 16.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed_and_deterministic() {
        let s = vec![("ngc".to_string(), vec![(0.0, 0.1), (1.0, 0.5), (2.0, f64::NAN)])];
        let a = line_chart("reward <t>", "step", "reward", &s);
        assert_eq!(a, line_chart("reward <t>", "step", "reward", &s));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("reward &lt;t&gt;"));
        let b = bar_chart("acc", "accuracy", &[("a".into(), 0.4), ("b".into(), 0.0)]);
        assert_eq!(b.matches("<rect").count(), 3);
    }
}
