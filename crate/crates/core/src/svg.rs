//! Dependency-free SVG rendering for oversight review: group-colored scatter
//! plots and per-group ROC curves. Output is a pure function of the inputs
//! (fixed palette, fixed float formatting, sorted legends), so rendered
//! bytes diff cleanly between audit runs.

use crate::dataset::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::metrics::RocPoint;
use crate::rng::Rng64;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
const LEGEND_WIDTH: f64 = 150.0;

/// Ten-color palette, cycled by sorted group index.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub const MAX_SCATTER_POINTS: usize = 10_000;
/// Seed for deterministic subsampling past the point cap; recorded in the
/// SVG's desc element.
pub const SCATTER_SUBSAMPLE_SEED: u64 = 42;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn of(xs: &[f64], ys: &[f64]) -> Frame {
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in xs {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &y in ys {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        let pad = |lo: &mut f64, hi: &mut f64| {
            let span = (*hi - *lo).max(1e-9);
            *lo -= 0.05 * span;
            *hi += 0.05 * span;
        };
        pad(&mut x_min, &mut x_max);
        pad(&mut y_min, &mut y_max);
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_header(title: &str, desc: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" ",
            "width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
            "<title>{}</title>\n<desc>{}</desc>\n",
            "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n"
        ),
        WIDTH + LEGEND_WIDTH,
        HEIGHT,
        WIDTH + LEGEND_WIDTH,
        HEIGHT,
        title,
        desc,
        WIDTH + LEGEND_WIDTH,
        HEIGHT
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN),
        fmt(HEIGHT - MARGIN),
        fmt(WIDTH - MARGIN),
        fmt(HEIGHT - MARGIN)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN),
        fmt(MARGIN),
        fmt(MARGIN),
        fmt(HEIGHT - MARGIN)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        fmt(WIDTH / 2.0),
        fmt(HEIGHT - 10.0),
        x_label
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        fmt(HEIGHT / 2.0),
        fmt(HEIGHT / 2.0),
        y_label
    ));
    for t in 0..=4 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * t as f64 / 4.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * t as f64 / 4.0;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n",
            fmt(frame.px(fx)),
            fmt(HEIGHT - MARGIN + 14.0),
            fmt(fx)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN - 4.0),
            fmt(frame.py(fy) + 3.0),
            fmt(fy)
        ));
    }
    out
}

/// Scatter of two numeric columns: color by group, marker shape by decision
/// (circle = positive, diamond = negative). Beyond MAX_SCATTER_POINTS the
/// rows are subsampled deterministically and the seed is recorded.
pub fn render_scatter_svg(
    ds: &Dataset,
    axis_x: &str,
    axis_y: &str,
    groups: &[String],
    decisions: &[bool],
) -> Result<String> {
    let xs = numeric_column(ds, axis_x)?;
    let ys = numeric_column(ds, axis_y)?;
    let n = ds.n_rows();
    if groups.len() != n || decisions.len() != n {
        return Err(Error::LengthMismatch {
            left: groups.len().max(decisions.len()),
            right: n,
        });
    }

    let mut rows: Vec<usize> = (0..n).collect();
    let subsampled = n > MAX_SCATTER_POINTS;
    if subsampled {
        let mut rng = Rng64::new(SCATTER_SUBSAMPLE_SEED);
        rng.shuffle(&mut rows);
        rows.truncate(MAX_SCATTER_POINTS);
        rows.sort_unstable();
    }

    let mut categories: Vec<&String> = groups.iter().collect();
    categories.sort();
    categories.dedup();
    let color_of = |g: &String| {
        let idx = categories.binary_search(&g).expect("category present");
        PALETTE[idx % PALETTE.len()]
    };

    let frame = Frame::of(&xs, &ys);
    let desc = if subsampled {
        format!(
            "points={} rendered={} subsample_seed={}",
            n,
            rows.len(),
            SCATTER_SUBSAMPLE_SEED
        )
    } else {
        format!("points={n}")
    };
    let mut out = svg_header(&format!("{axis_x} vs {axis_y}"), &desc);
    out.push_str(&axes(&frame, axis_x, axis_y));
    for &row in &rows {
        let (px, py) = (frame.px(xs[row]), frame.py(ys[row]));
        let color = color_of(&groups[row]);
        if decisions[row] {
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.7\"/>\n",
                fmt(px),
                fmt(py),
                color
            ));
        } else {
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"4.2\" height=\"4.2\" fill=\"{}\" fill-opacity=\"0.7\" transform=\"rotate(45 {} {})\"/>\n",
                fmt(px - 2.1),
                fmt(py - 2.1),
                color,
                fmt(px),
                fmt(py)
            ));
        }
    }
    // Legend: one entry per group category plus the marker key.
    for (i, cat) in categories.iter().enumerate() {
        let y = MARGIN + 18.0 * i as f64;
        out.push_str(&format!(
            "<circle class=\"legend-entry\" cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n",
            fmt(WIDTH + 16.0),
            fmt(y),
            color_of(cat)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            fmt(WIDTH + 26.0),
            fmt(y + 4.0),
            cat
        ));
    }
    let marker_y = MARGIN + 18.0 * categories.len() as f64 + 12.0;
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"10\">circle = positive</text>\n",
        fmt(WIDTH + 10.0),
        fmt(marker_y)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"10\">diamond = negative</text>\n",
        fmt(WIDTH + 10.0),
        fmt(marker_y + 14.0)
    ));
    out.push_str("</svg>\n");
    Ok(out)
}

fn numeric_column(ds: &Dataset, name: &str) -> Result<Vec<f64>> {
    match ds.column(name) {
        Some((_, ColumnData::Numeric(v))) => Ok(v.clone()),
        Some(_) => Err(Error::NotNumericAxis(name.to_string())),
        None => Err(Error::UnknownAttribute(name.to_string())),
    }
}

/// One polyline per group ROC plus the chance diagonal.
pub fn render_roc_svg(curves: &[(String, Vec<RocPoint>)]) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::EmptyCurves);
    }
    let frame = Frame {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };
    let mut out = svg_header("ROC by group", &format!("curves={}", curves.len()));
    out.push_str(&axes(&frame, "false positive rate", "true positive rate"));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n",
        fmt(frame.px(0.0)),
        fmt(frame.py(0.0)),
        fmt(frame.px(1.0)),
        fmt(frame.py(1.0))
    ));
    let mut ordered: Vec<&(String, Vec<RocPoint>)> = curves.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    for (i, (group, points)) in ordered.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .map(|p| format!("{},{}", fmt(frame.px(p.fpr)), fmt(frame.py(p.tpr))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            path.join(" "),
            color
        ));
        let y = MARGIN + 18.0 * i as f64;
        out.push_str(&format!(
            "<rect class=\"legend-entry\" x=\"{}\" y=\"{}\" width=\"10\" height=\"3\" fill=\"{}\"/>\n",
            fmt(WIDTH + 12.0),
            fmt(y),
            color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            fmt(WIDTH + 26.0),
            fmt(y + 5.0),
            group
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}
