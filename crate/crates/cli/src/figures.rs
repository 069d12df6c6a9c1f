//! Hand-written SVG: a polar heat map and a bar histogram.

use std::f64::consts::{PI, TAU};
use std::fmt::Write;

/// Cyclic colour for a phase in `[0, 2pi)`.
pub fn phase_color(phase: f64) -> String {
    let h = (phase.rem_euclid(TAU) / TAU) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    // soften towards white so the map stays readable
    let c = |v: f64| (40.0 + v * 200.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(r), c(g), c(b))
}

/// Polar heat map: radius is elevation `thetas` (radians), angle is
/// azimuth `phis` (radians); `grid[i][j]` is the value at `(thetas[i], phis[j])`.
pub fn polar_heatmap(
    title: &str,
    thetas: &[f64],
    phis: &[f64],
    grid: &[Vec<f64>],
    theta_max: f64,
) -> String {
    let size = 520.0;
    let c = size / 2.0;
    let rmax = c - 40.0;
    let radius = |t: f64| rmax * t / theta_max;
    let point = |t: f64, p: f64| (c + radius(t) * p.cos(), c - radius(t) * p.sin());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h}" viewBox="0 0 {size} {h}">"#,
        h = size + 30.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for i in 0..thetas.len().saturating_sub(1) {
        for j in 0..phis.len().saturating_sub(1) {
            let (t0, t1, p0, p1) = (thetas[i], thetas[i + 1], phis[j], phis[j + 1]);
            let a = point(t0, p0);
            let b = point(t1, p0);
            let d = point(t1, p1);
            let e = point(t0, p1);
            let _ = writeln!(
                s,
                r#"<path d="M{:.2},{:.2} L{:.2},{:.2} A{r1:.2},{r1:.2} 0 0 0 {:.2},{:.2} L{:.2},{:.2} A{r0:.2},{r0:.2} 0 0 1 {:.2},{:.2} Z" fill="{col}" stroke="{col}" stroke-width="0.3"/>"#,
                a.0,
                a.1,
                b.0,
                b.1,
                d.0,
                d.1,
                e.0,
                e.1,
                a.0,
                a.1,
                r1 = radius(t1),
                r0 = radius(t0),
                col = phase_color(grid[i][j]),
            );
        }
    }
    for deg in [25.0_f64, 50.0, 75.0] {
        let r = radius(deg.to_radians());
        let _ = writeln!(
            s,
            r##"<circle cx="{c}" cy="{c}" r="{r:.2}" fill="none" stroke="#333" stroke-width="0.6"/><text x="{:.1}" y="{c}" font-size="10" font-family="sans-serif">{deg}°</text>"##,
            c + r + 2.0
        );
    }
    for k in 0..8 {
        let p = k as f64 * PI / 4.0;
        let (x, y) = point(theta_max, p);
        let _ = writeln!(
            s,
            r##"<line x1="{c}" y1="{c}" x2="{x:.2}" y2="{y:.2}" stroke="#333" stroke-width="0.4"/>"##
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{c}" y="{:.1}" text-anchor="middle" font-size="13" font-family="sans-serif">{title}</text>"#,
        size + 15.0
    );
    s.push_str("</svg>\n");
    s
}

/// Vertical bar chart of `counts` over equal-width bins.
pub fn histogram(title: &str, counts: &[u64], lo: f64, hi: f64) -> String {
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let bw = (w - 2.0 * pad) / counts.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, &n) in counts.iter().enumerate() {
        let bh = (h - 2.0 * pad) * n as f64 / max;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#4a78b5" stroke="white" stroke-width="0.5"><title>{n}</title></rect>"##,
            pad + i as f64 * bw,
            h - pad - bh,
            bw
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{pad}" y1="{y}" x2="{x2}" y2="{y}" stroke="#333"/><text x="{pad}" y="{ty}" font-size="11" font-family="sans-serif">{lo:.2}</text><text x="{x2}" y="{ty}" text-anchor="end" font-size="11" font-family="sans-serif">{hi:.2}</text>"##,
        y = h - pad,
        x2 = w - pad,
        ty = h - pad + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13" font-family="sans-serif">{title}</text>"#,
        w / 2.0
    );
    s.push_str("</svg>\n");
    s
}
