//! Bare-bones SVG line plots for KM curves and ROC curves.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// `step` draws right-continuous steps between points.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], step: bool) -> String {
    let x_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .filter(|x| x.is_finite())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let sx = |x: f64| PAD + x / x_max * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y.clamp(0.0, 1.0) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (k, tick) in [0.0, 0.5, 1.0].iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, PAD - 6.0, sy(*tick) + 4.0);
        let x = x_max * k as f64 / 2.0;
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, sx(x), H - PAD + 16.0, x.round());
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        let mut last_y = None;
        for &(x, y) in s.points.iter().filter(|p| p.0.is_finite()) {
            match last_y {
                None => {
                    let _ = write!(d, "M{:.2},{:.2}", sx(x), sy(y));
                }
                Some(ly) if step => {
                    let _ = write!(d, " L{:.2},{:.2} L{:.2},{:.2}", sx(x), sy(ly), sx(x), sy(y));
                }
                Some(_) => {
                    let _ = write!(d, " L{:.2},{:.2}", sx(x), sy(y));
                }
            }
            last_y = Some(y);
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - PAD - 120.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
