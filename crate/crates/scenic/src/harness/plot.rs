//! Static SVG line charts for metric series. Output bytes are a pure
//! function of the input files, so charts can be diffed and regenerated
//! reproducibly; no plotting library is worth that trade here.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::env::FRAMES_PER_SECOND;
use crate::metrics::{parse_series_csv, Series};

use super::{io_err, HarnessError};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 76.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 76.0;
const TICKS: usize = 5;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Reads series CSVs and writes a line chart. The x axis is gameplay
/// frames with a secondary row of labels in simulated seconds; one curve
/// per input file, colored and legended in input order.
pub fn plot_series(
    series_files: &[PathBuf],
    labels: &[String],
    out: &Path,
) -> Result<(), HarnessError> {
    if series_files.is_empty() {
        return Err(HarnessError::Usage("no series files given".into()));
    }
    if labels.len() != series_files.len() {
        return Err(HarnessError::Usage(format!(
            "{} series files but {} labels",
            series_files.len(),
            labels.len()
        )));
    }
    let mut series = Vec::with_capacity(series_files.len());
    for file in series_files {
        let text = std::fs::read_to_string(file).map_err(|e| io_err(file, e))?;
        let parsed = parse_series_csv(&text).map_err(|e| HarnessError::Series {
            file: file.clone(),
            source: e,
        })?;
        series.push(parsed);
    }
    if series.iter().all(|s| s.is_empty()) {
        return Err(HarnessError::Usage("every series is empty".into()));
    }
    let svg = render_svg(&series, labels);
    std::fs::write(out, svg).map_err(|e| io_err(out, e))
}

/// Data range padded so a flat or single-point series still has visible
/// extent.
fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn render_svg(series: &[Series], labels: &[String]) -> String {
    let points = series.iter().flatten();
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for &(frames, value) in points {
        x_lo = x_lo.min(frames as f64);
        x_hi = x_hi.max(frames as f64);
        y_lo = y_lo.min(value);
        y_hi = y_hi.max(value);
    }
    let (x_lo, x_hi) = padded_range(x_lo, x_hi);
    let (y_lo, y_hi) = padded_range(y_lo, y_hi);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;
    let x_axis = MARGIN_TOP + plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"11\">\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );

    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = fmt_coord(MARGIN_LEFT),
        r = fmt_coord(WIDTH - MARGIN_RIGHT),
        t = fmt_coord(MARGIN_TOP),
        b = fmt_coord(x_axis),
    );

    // X ticks: frames on the first row, simulated seconds below.
    for i in 0..TICKS {
        let value = x_lo + (x_hi - x_lo) * i as f64 / (TICKS - 1) as f64;
        let x = fmt_coord(px(value));
        let _ = write!(
            svg,
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\">{frames}</text>\n\
             <text x=\"{x}\" y=\"{sy}\" text-anchor=\"middle\" fill=\"#555\">{secs}</text>\n",
            b = fmt_coord(x_axis),
            b2 = fmt_coord(x_axis + 5.0),
            ty = fmt_coord(x_axis + 18.0),
            sy = fmt_coord(x_axis + 34.0),
            frames = format!("{value:.0}"),
            secs = fmt_num(value / FRAMES_PER_SECOND as f64),
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{cx}\" y=\"{y1}\" text-anchor=\"middle\">gameplay frames</text>\n\
         <text x=\"{cx}\" y=\"{y2}\" text-anchor=\"middle\" fill=\"#555\">simulated seconds</text>\n",
        cx = fmt_coord(MARGIN_LEFT + plot_w / 2.0),
        y1 = fmt_coord(x_axis + 52.0),
        y2 = fmt_coord(x_axis + 68.0),
    );

    // Y ticks.
    for i in 0..TICKS {
        let value = y_lo + (y_hi - y_lo) * i as f64 / (TICKS - 1) as f64;
        let y = fmt_coord(py(value));
        let _ = write!(
            svg,
            "<line x1=\"{l2}\" y1=\"{y}\" x2=\"{l}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\">{label}</text>\n",
            l = fmt_coord(MARGIN_LEFT),
            l2 = fmt_coord(MARGIN_LEFT - 5.0),
            tx = fmt_coord(MARGIN_LEFT - 8.0),
            ty = fmt_coord(py(value) + 4.0),
            label = fmt_num(value),
        );
    }

    // Curves.
    for (i, points) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if points.is_empty() {
            continue;
        }
        let mut coords = String::new();
        for (j, &(frames, value)) in points.iter().enumerate() {
            if j > 0 {
                coords.push(' ');
            }
            let _ = write!(
                coords,
                "{},{}",
                fmt_coord(px(frames as f64)),
                fmt_coord(py(value))
            );
        }
        let _ = write!(
            svg,
            "<polyline points=\"{coords}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        );
        // A one-point polyline draws nothing; mark it.
        if points.len() == 1 {
            let (frames, value) = points[0];
            let _ = write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>\n",
                fmt_coord(px(frames as f64)),
                fmt_coord(py(value))
            );
        }
    }

    // Legend, input order, top-left of the plot area.
    for (i, label) in labels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 10.0 + 16.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{x}\" y=\"{ry}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\">{text}</text>\n",
            x = fmt_coord(MARGIN_LEFT + 10.0),
            ry = fmt_coord(y),
            tx = fmt_coord(MARGIN_LEFT + 25.0),
            ty = fmt_coord(y + 9.0),
            text = xml_escape(label),
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Short deterministic number form for tick labels.
fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs();
    if !(0.001..10000.0).contains(&magnitude) {
        return format!("{v:.3e}");
    }
    let mut s = format!("{v:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            other => out.push(other),
        }
    }
    out
}
