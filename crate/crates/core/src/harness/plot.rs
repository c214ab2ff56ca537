//! Standalone SVG line plots with no external dependencies.

use std::fmt::Write;

pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { name: name.into(), x, y }
    }
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 150.0;
const PAD_T: f64 = 40.0;
const PAD_B: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
/// Long series are reduced to min/max pairs per bucket.
const MAX_POINTS: usize = 4000;

fn reduce(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len().min(y.len());
    if n <= MAX_POINTS {
        return (0..n).map(|i| (x[i], y[i])).collect();
    }
    let buckets = MAX_POINTS / 2;
    let mut out = Vec::with_capacity(MAX_POINTS);
    for b in 0..buckets {
        let (lo, hi) = (b * n / buckets, ((b + 1) * n / buckets).max(b * n / buckets + 1));
        let (mut imin, mut imax) = (lo, lo);
        for i in lo..hi {
            if y[i] < y[imin] {
                imin = i;
            }
            if y[i] > y[imax] {
                imax = i;
            }
        }
        let (a, c) = if imin <= imax { (imin, imax) } else { (imax, imin) };
        out.push((x[a], y[a]));
        if c != a {
            out.push((x[c], y[c]));
        }
    }
    out
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let reduced: Vec<Vec<(f64, f64)>> = series.iter().map(|s| reduce(&s.x, &s.y)).collect();
    let (x0, x1) = range(reduced.iter().flatten().map(|p| p.0));
    let (y0, y1) = range(reduced.iter().flatten().map(|p| p.1));
    let pw = W - PAD_L - PAD_R;
    let ph = H - PAD_T - PAD_B;
    let sx = |x: f64| PAD_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| PAD_T + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, PAD_L + pw / 2.0, esc(title));
    let _ = writeln!(s, r##"<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#ddd"/>"##, PAD_T, PAD_T + ph);
        let _ = writeln!(s, r##"<line x1="{PAD_L}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/>"##, PAD_L + pw);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{xv:.4}</text>"#, PAD_T + ph + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{yv:.4}</text>"#, PAD_L - 6.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, PAD_L + pw / 2.0, H - 10.0, esc(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y:.2}" text-anchor="middle" transform="rotate(-90 16 {y:.2})">{}</text>"#,
        esc(ylabel),
        y = PAD_T + ph / 2.0
    );
    for (i, (pts, ser)) in reduced.iter().zip(series).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (j, (x, y)) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, sx(*x), sy(*y));
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.4"/>"#, d.trim_end());
        let ly = PAD_T + 14.0 + 18.0 * i as f64;
        let lx = PAD_L + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, esc(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_and_reduced() {
        let x: Vec<f64> = (0..100_000).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| (t * 1e-3).sin()).collect();
        let svg = line_plot("a < b", "t", "u", &[Series::new("sin", x, y)]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.matches('L').count() < 2 * MAX_POINTS);
    }

    #[test]
    fn constant_series_has_finite_axes() {
        let svg = line_plot("c", "t", "u", &[Series::new("c", vec![0.0, 1.0], vec![2.0, 2.0])]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
