use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, y_max: f64) {
    let (x0, y0, x1, y1) = (PAD, H - PAD, W - PAD / 2.0, PAD);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = y0 - (y0 - y1) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.2}</text>"#, x0 - 6.0, y + 4.0, v);
        let _ = writeln!(out, r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/>"##);
    }
}

/// Vertical bars, one per (label, value).
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let y_max = bars.iter().map(|b| b.1).fold(1e-12, f64::max).max(1.0);
    axes(&mut out, y_max);
    let span = W - 1.5 * PAD;
    let slot = span / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = (H - 2.0 * PAD) * v / y_max;
        let x = PAD + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
            H - PAD - h,
            slot * 0.7,
            COLORS[i % COLORS.len()]
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x + slot * 0.35, H - PAD + 16.0, escape(label));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.3}</text>"#, x + slot * 0.35, H - PAD - h - 4.0);
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Polylines sharing one pair of axes, with a legend.
pub fn line_chart_svg(title: &str, x_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY, 1e-12f64);
    for &(x, y) in pts {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let y_max = y_max.max(1.0);
    axes(&mut out, y_max);
    let sx = |x: f64| PAD + (W - 1.5 * PAD) * (x - x_min) / (x_max - x_min);
    let sy = |y: f64| H - PAD - (H - 2.0 * PAD) * y / y_max;
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 14.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="{PAD}" y="{}" text-anchor="middle">{x_min}</text>"#, H - PAD + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{x_max}</text>"#, W - PAD / 2.0, H - PAD + 16.0);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, W - 170.0, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, W - 155.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}
