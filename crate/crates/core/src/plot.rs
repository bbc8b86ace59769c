//! Self-contained SVG output. Coordinates are printed with fixed precision
//! so identical input gives byte-identical files.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::propagator::admissible;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axes {
    Linear,
    LogY,
    LogLog,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn range(v: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() || !hi.is_finite() {
        return None;
    }
    if hi - lo < 1e-300 {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

/// Line plot of one or more series. Points that cannot be shown on a log
/// axis are dropped.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], axes: Axes) -> Result<String> {
    let tx = |x: f64| if axes == Axes::LogLog { x.log10() } else { x };
    let ty = |y: f64| if axes == Axes::Linear { y } else { y.log10() };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.x.iter()
                .zip(&s.y)
                .map(|(&x, &y)| (tx(x), ty(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    if pts.iter().all(|p| p.is_empty()) {
        return Err(Error::InvalidParams("nothing to plot".into()));
    }
    let (x0, x1) = range(pts.iter().flatten().map(|p| p.0)).unwrap();
    let (y0, y1) = range(pts.iter().flatten().map(|p| p.1)).unwrap();
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 1.5 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 1.5 * MARGIN);

    let mut out = String::new();
    header(&mut out, W, H);
    let _ = writeln!(out, r#"<text x="{:.1}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        MARGIN / 2.0,
        W - 1.5 * MARGIN,
        H - 1.5 * MARGIN
    );
    let log_x = axes == Axes::LogLog;
    let log_y = axes != Axes::Linear;
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (vx, vy) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let lx = if log_x { format!("1e{vx:.2}") } else { format!("{vx:.3}") };
        let ly = if log_y { format!("1e{vy:.2}") } else { format!("{vy:.3}") };
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{lx}</text>"#, sx(vx), H - MARGIN + 16.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ly}</text>"#, MARGIN - 4.0, sy(vy) + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, W / 2.0, H - 14.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            W - 1.5 * MARGIN - 100.0,
            MARGIN / 2.0 + 16.0 * (k + 1) as f64,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Lower edge of the admissible set in the `(1/p, 1/q)` square: for each of
/// `n` columns `1/p ∈ [0, 1/2)`, the smallest `1/q` accepted by
/// [`admissible`], located by bisection on the predicate itself.
pub fn admissible_boundary(d: usize, n: usize) -> Vec<(f64, f64)> {
    let ok = |ip: f64, iq: f64| admissible(1.0 / iq, 1.0 / ip, d);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ip = 0.5 * i as f64 / n as f64;
        if !ok(ip, 0.5) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 0.5);
        if ok(ip, lo) {
            out.push((ip, 0.0));
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(ip, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push((ip, hi));
    }
    out
}

/// One panel per dimension: shaded cells where the predicate holds, the
/// traced boundary, and the endpoint `(q, p) = (∞, 2)`.
pub fn admissible_map(dims: &[usize], cells: usize) -> Result<String> {
    if dims.is_empty() || cells == 0 {
        return Err(Error::InvalidParams("nothing to plot".into()));
    }
    let side = 240.0;
    let pad = 50.0;
    let w = dims.len() as f64 * (side + pad) + pad;
    let h = side + 2.0 * pad;
    let mut out = String::new();
    header(&mut out, w, h);
    for (k, &d) in dims.iter().enumerate() {
        let ox = pad + k as f64 * (side + pad);
        let oy = pad;
        let sx = |ip: f64| ox + ip / 0.5 * side;
        let sy = |iq: f64| oy + side - iq / 0.5 * side;
        let c = side / cells as f64;
        for i in 0..cells {
            for j in 0..cells {
                let ip = 0.5 * (i as f64 + 0.5) / cells as f64;
                let iq = 0.5 * (j as f64 + 0.5) / cells as f64;
                if admissible(1.0 / iq, 1.0 / ip, d) {
                    let _ = writeln!(
                        out,
                        r##"<rect x="{:.2}" y="{:.2}" width="{c:.2}" height="{c:.2}" fill="#c6dbef"/>"##,
                        sx(ip) - c / 2.0,
                        sy(iq) - c / 2.0
                    );
                }
            }
        }
        let pts: Vec<String> =
            admissible_boundary(d, 4 * cells).iter().map(|&(ip, iq)| format!("{:.2},{:.2}", sx(ip), sy(iq))).collect();
        let _ = writeln!(out, r##"<polyline fill="none" stroke="#08519c" stroke-width="2" points="{}"/>"##, pts.join(" "));
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#08519c"/>"##, sx(0.5), sy(0.0));
        let _ = writeln!(
            out,
            r#"<rect x="{ox:.1}" y="{oy:.1}" width="{side:.1}" height="{side:.1}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">d = {d}</text>"#, ox + side / 2.0, oy - 12.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1/p</text>"#, ox + side / 2.0, oy + side + 34.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1/q</text>"#, ox - 8.0, oy + side / 2.0);
        for (v, label) in [(0.0, "0"), (0.5, "1/2")] {
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, sx(v), oy + side + 16.0);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, ox - 4.0, sy(v) + 4.0);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_is_the_scaling_line() {
        for d in 1..=3 {
            let df = d as f64;
            for (ip, iq) in admissible_boundary(d, 200) {
                let line = (df / 4.0 - df * ip / 2.0).max(0.0);
                assert!((iq - line).abs() < 1e-12, "d={d} 1/p={ip}: {iq} vs {line}");
            }
        }
    }

    #[test]
    fn plots_are_deterministic() {
        let s = [Series::new("a", vec![1.0, 2.0, 4.0], vec![1.0, 0.5, 0.25])];
        let a = line_plot("t", "x", "y", &s, Axes::LogLog).unwrap();
        assert_eq!(a, line_plot("t", "x", "y", &s, Axes::LogLog).unwrap());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(admissible_map(&[1, 2, 3], 20).unwrap(), admissible_map(&[1, 2, 3], 20).unwrap());
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(line_plot("t", "x", "y", &[], Axes::Linear).is_err());
        let s = [Series::new("neg", vec![1.0], vec![-1.0])];
        assert!(line_plot("t", "x", "y", &s, Axes::LogY).is_err());
        assert!(admissible_map(&[], 10).is_err());
    }
}
