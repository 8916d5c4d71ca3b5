//! Minimal static SVG plots: line charts and a cell heat map.

use std::fmt::Write;

use tmedia_core::{GridSpec, ScalarField};

use crate::report::SweepSummary;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Series<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log: bool) -> String {
    let tf = |v: f64| if log { v.log10() } else { v };
    let kept: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().filter(|p| !log || (p.0 > 0.0 && p.1 > 0.0)).map(|&(x, y)| (tf(x), tf(y))).collect())
        .collect();
    let (x0, x1) = range(kept.iter().flatten().map(|p| p.0));
    let (y0, y1) = range(kept.iter().flatten().map(|p| p.1));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = String::new();
    header(&mut out, title);
    let _ = write!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let tick = |v: f64| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            H - PAD + 16.0,
            tick(xv)
        );
        let _ =
            write!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, sy(yv) + 4.0, tick(yv));
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(xlabel));
    let _ = write!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (k, (s, pts)) in series.iter().zip(&kept).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ =
            write!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        if log {
            for &(x, y) in pts {
                let _ = write!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
        let ly = PAD + 16.0 + 16.0 * k as f64;
        let _ = write!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            W - PAD - 8.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn heat_map(title: &str, u: &ScalarField, nx: usize, ny: usize) -> String {
    let (lo, hi) = range(u.values().iter().copied());
    let a = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let side = (H - 2.0 * PAD).min(W - 2.0 * PAD);
    let (cw, ch) = (side / nx as f64, side / ny as f64);
    let mut out = String::new();
    header(&mut out, title);
    for (k, &v) in u.values().iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        // diverging blue-white-red scale centered at zero
        let t = (v / a).clamp(-1.0, 1.0);
        let (r, g, b) = if t >= 0.0 {
            (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
        } else {
            (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
        };
        let _ = write!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({},{},{})"/>"#,
            PAD + i as f64 * cw,
            PAD + (ny - 1 - j) as f64 * ch,
            cw + 0.05,
            ch + 0.05,
            r as u8,
            g as u8,
            b as u8
        );
    }
    let _ = write!(out, r#"<text x="{}" y="{}">min {lo:.4e}, max {hi:.4e}</text>"#, PAD + side + 12.0, PAD + 12.0);
    out.push_str("</svg>\n");
    out
}

/// `u` against `r` (radial) or a heat map (rectangle), with the reference
/// solution overlaid when given.
pub fn solution_svg(u: &ScalarField, exact: Option<&ScalarField>, title: &str) -> String {
    match *u.grid().spec() {
        GridSpec::RadialBall { .. } => {
            let pts =
                |f: &ScalarField| f.grid().centers().iter().map(|c| c[0]).zip(f.values().iter().copied()).collect();
            let mut series = vec![Series { label: "u (final eps)", points: pts(u) }];
            if let Some(e) = exact {
                series.push(Series { label: "reference", points: pts(e) });
            }
            line_chart(title, "r", "u", &series, false)
        }
        GridSpec::Rectangle { nx, ny, .. } => heat_map(title, u, nx, ny),
    }
}

/// Cauchy gaps and (when known) errors against `eps`, log-log.
pub fn convergence_svg(sweep: &SweepSummary) -> String {
    let gaps = sweep.entries.iter().filter_map(|e| e.cauchy_gap.map(|g| (e.eps, g))).collect();
    let mut series = vec![Series { label: "L1 Cauchy gap", points: gaps }];
    let errors: Vec<_> = sweep.entries.iter().filter_map(|e| e.max_error.map(|m| (e.eps, m))).collect();
    if !errors.is_empty() {
        series.push(Series { label: "max error", points: errors });
    }
    line_chart("eps convergence", "eps", "value", &series, true)
}
