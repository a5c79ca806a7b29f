//! Minimal hand-rolled SVG line plots.
//!
//! One fixed-size chart style: two named curves over a shared x axis, with
//! ticks, axis labels and a legend. Output is plain SVG 1.1 with no
//! external references and deterministic text, so identical data always
//! renders byte-identical markup.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;

/// One curve: a name, a stroke color, and y values paired with the shared
/// x values.
pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub y: Vec<f64>,
}

/// Renders a two-curve line plot. `x` is shared by both series.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[Series],
) -> String {
    let (x_min, x_max) = padded_range(x.iter().copied());
    let (y_min, y_max) = padded_range(series.iter().flat_map(|s| s.y.iter().copied()));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |v: f64| MARGIN_LEFT + (v - x_min) / (x_max - x_min) * plot_w;
    let sy = move |v: f64| MARGIN_TOP + plot_h - (v - y_min) / (y_max - y_min) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="16" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );

    // Gridlines and ticks.
    for t in ticks(x_min, x_max) {
        let px = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.3}" y1="{:.3}" x2="{px:.3}" y2="{:.3}" stroke="#dddddd" stroke-width="1"/>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.3}" y="{:.3}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h + 18.0,
            fmt_num(t)
        );
    }
    for t in ticks(y_min, y_max) {
        let py = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.3}" y1="{py:.3}" x2="{:.3}" y2="{py:.3}" stroke="#dddddd" stroke-width="1"/>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            fmt_num(t)
        );
    }

    // Axes on top of the grid.
    let _ = writeln!(
        out,
        r#"<rect x="{:.3}" y="{:.3}" width="{plot_w:.3}" height="{plot_h:.3}" fill="none" stroke="black" stroke-width="1"/>"#,
        MARGIN_LEFT, MARGIN_TOP
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.3})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    // Curves.
    for s in series {
        let mut points = String::new();
        for (xv, yv) in x.iter().zip(&s.y) {
            let _ = write!(points, "{:.3},{:.3} ", sx(*xv), sy(*yv));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"/>"#,
            points.trim_end(),
            s.color
        );
    }

    // Legend, top right inside the plot area.
    for (k, s) in series.iter().enumerate() {
        let ly = MARGIN_TOP + 16.0 + 18.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w - 170.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.3}" y1="{ly:.3}" x2="{:.3}" y2="{ly:.3}" stroke="{}" stroke-width="1.8"/>"#,
            lx + 26.0,
            s.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Data range padded by 4% on each side; degenerate ranges get a unit pad
/// so a constant curve still plots mid-chart.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        return (min - 1.0, max + 1.0);
    }
    let pad = (max - min) * 0.04;
    (min - pad, max + pad)
}

/// Round tick positions: a 1/2/5-scaled step giving 4 to 9 ticks.
fn ticks(min: f64, max: f64) -> Vec<f64> {
    let span = max - min;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 9.0)
        .unwrap_or(10.0 * mag);
    let mut t = (min / step).ceil() * step;
    let mut out = Vec::new();
    while t <= max + step * 1e-9 {
        // Snap values that should be zero to zero exactly.
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

/// Shortest clean decimal for tick labels.
fn fmt_num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_contains_both_curves_and_labels() {
        let x = vec![0.0, 0.5, 1.0];
        let series = [
            Series { name: "target", color: "#1f77b4", y: vec![0.0, 1.0, 0.5] },
            Series { name: "achieved", color: "#d62728", y: vec![0.1, 0.9, 0.6] },
        ];
        let svg = line_plot("shift", "position [m]", "shift [mm]", &x, &series);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("position [m]"));
        assert!(svg.contains("shift [mm]"));
        assert!(svg.contains("target"));
        assert!(svg.contains("achieved"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn constant_data_still_plots() {
        let x = vec![0.0, 1.0];
        let series = [Series { name: "flat", color: "#000000", y: vec![0.0, 0.0] }];
        let svg = line_plot("t", "x", "y", &x, &series);
        assert_eq!(svg.matches("<polyline").count(), 1);
        // No NaNs leaked into coordinates.
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn identical_input_renders_identical_markup() {
        let x = vec![0.0, 0.25, 0.5];
        let mk = || {
            line_plot(
                "d",
                "x",
                "y",
                &x,
                &[Series { name: "a", color: "#111111", y: vec![1.0, 3.0, 2.0] }],
            )
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn tick_spacing_is_round() {
        let t = ticks(0.0, 0.92);
        assert!(t.len() >= 4 && t.len() <= 10);
        for pair in t.windows(2) {
            assert!((pair[1] - pair[0] - 0.2).abs() < 1e-12);
        }
        assert_eq!(fmt_num(0.6000000000000001), "0.6");
        assert_eq!(fmt_num(-32.0), "-32");
    }
}
