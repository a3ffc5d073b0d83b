//! Minimal static SVG line charts: axes, labeled series, and optional
//! shaded standard-error bands. No external renderer is involved; the CSV
//! files remain the authoritative record.

use std::fs;
use std::path::Path;

use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 140.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub name: String,
    /// (x, mean) points in data coordinates.
    pub points: Vec<(f64, f64)>,
    /// Optional per-point standard error for a shaded band.
    pub se: Option<Vec<f64>>,
}

pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<(), CliError> {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let e = s.se.as_ref().map(|se| se[i]).unwrap_or(0.0);
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y - e);
            y_max = y_max.max(y + e);
        }
    }
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = WIDTH,
        h = HEIGHT
    ));
    svg.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        WIDTH, HEIGHT
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        title
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B
    ));
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_min + frac * (y_max - y_min);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.3}</text>\n",
            px(xv),
            HEIGHT - MARGIN_B + 18.0,
            xv
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.3}</text>\n",
            MARGIN_L - 6.0,
            py(yv) + 4.0,
            yv
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 10.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {y})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        y_label,
        y = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    ));

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if let Some(se) = &s.se {
            let mut band = String::from("<path d=\"");
            for (j, &(x, y)) in s.points.iter().enumerate() {
                band.push_str(&format!(
                    "{}{:.2} {:.2} ",
                    if j == 0 { "M" } else { "L" },
                    px(x),
                    py(y + se[j])
                ));
            }
            for (j, &(x, y)) in s.points.iter().enumerate().rev() {
                band.push_str(&format!("L{:.2} {:.2} ", px(x), py(y - se[j])));
            }
            band.push_str(&format!("Z\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n", color));
            svg.push_str(&band);
        }
        let mut line = String::from("<polyline fill=\"none\" points=\"");
        for &(x, y) in &s.points {
            line.push_str(&format!("{:.2},{:.2} ", px(x), py(y)));
        }
        line.push_str(&format!("\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", color));
        svg.push_str(&line);
        let ly = MARGIN_T + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{c}\" stroke-width=\"2\"/><text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"12\">{n}</text>\n",
            x = WIDTH - MARGIN_R + 10.0,
            x2 = WIDTH - MARGIN_R + 34.0,
            y = ly,
            c = color,
            tx = WIDTH - MARGIN_R + 40.0,
            ty = ly + 4.0,
            n = s.name
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| CliError::Io(path.display().to_string(), e))
}
