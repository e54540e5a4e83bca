//! Self-contained SVG plot of a sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::SweepResult;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Renders the three indicator curves against the density ratio on a fixed
/// `[0, 1]` indicator axis, marking the crossing when there is one.
pub fn render_plot(result: &SweepResult) -> Result<String> {
    let ratios = result.ratios();
    if ratios.len() < 2 {
        return Err(Error::invalid("a plot needs at least two density ratios"));
    }
    let (x_min, x_max) = (ratios[0], ratios[ratios.len() - 1]);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * plot_h;

    let mut s = String::new();
    let w = &mut s;
    // Writing into a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/></g>"#,
        sy(0.0),
        LEFT + plot_w,
        sy(0.0),
        sy(0.0)
    );
    for k in 0..=10 {
        let y = k as f64 / 10.0;
        let _ = writeln!(
            w,
            r##"<g class="ytick"><line x1="{}" y1="{1}" x2="{LEFT}" y2="{1}" stroke="black"/><line x1="{LEFT}" y1="{1}" x2="{2}" y2="{1}" stroke="#ddd"/><text x="{3}" y="{4}" text-anchor="end">{5:.1}</text></g>"##,
            LEFT - 5.0,
            sy(y),
            LEFT + plot_w,
            LEFT - 8.0,
            sy(y) + 4.0,
            y
        );
    }
    for &x in &ratios {
        let _ = writeln!(
            w,
            r#"<g class="xtick"><line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text></g>"#,
            sx(x),
            sy(0.0),
            sy(0.0) + 5.0,
            sy(0.0) + 18.0,
            x
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">density ratio λm/λn</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );

    let curves: [(&str, &str, Vec<f64>); 3] = [
        ("r_u", "#1f77b4", result.rows.iter().map(|r| r.r_u.mean).collect()),
        ("r_n", "#d62728", result.rows.iter().map(|r| r.r_n.mean).collect()),
        ("r_c", "#2ca02c", result.rows.iter().map(|r| r.r_c.mean).collect()),
    ];
    for (k, (name, colour, ys)) in curves.iter().enumerate() {
        // Missing points (no usable instance) split the curve.
        let mut segments: Vec<Vec<String>> = vec![Vec::new()];
        for (x, y) in ratios.iter().zip(ys) {
            if y.is_finite() {
                segments.last_mut().expect("non-empty").push(format!("{:.2},{:.2}", sx(*x), sy(*y)));
            } else if !segments.last().expect("non-empty").is_empty() {
                segments.push(Vec::new());
            }
        }
        for seg in segments.iter().filter(|s| !s.is_empty()) {
            let _ = writeln!(
                w,
                r#"<polyline class="curve {name}" fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
                seg.join(" ")
            );
        }
        let ly = TOP + 20.0 + 20.0 * k as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            w,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{name}</text></g>"#,
            lx + 25.0,
            lx + 30.0,
            ly + 4.0
        );
    }
    if let Some(c) = result.crossing {
        let _ = writeln!(
            w,
            r#"<circle class="crossing" cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="black" stroke-width="2"><title>crossing at ratio {:.3}, level {:.3}</title></circle>"#,
            sx(c.ratio),
            sy(c.level),
            c.ratio,
            c.level
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

pub fn emit_plot(result: &SweepResult, path: &Path) -> Result<()> {
    let svg = render_plot(result)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
