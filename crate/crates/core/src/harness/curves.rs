use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::run::RunLog;
use crate::{Error, Result};

/// Mean learning curve over repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateCurve {
    pub mean: Vec<f64>,
    /// Trailing moving average of `mean`; the first `window - 1` points
    /// average over the episodes seen so far.
    pub smoothed: Vec<f64>,
    pub window: usize,
    pub num_repetitions: usize,
}

/// Pointwise mean of equally long logs plus its moving average.
pub fn aggregate(logs: &[RunLog], window: usize) -> Result<AggregateCurve> {
    let Some(first) = logs.first() else {
        return Err(Error::Argument("nothing to aggregate".into()));
    };
    if window == 0 {
        return Err(Error::Argument("smoothing window must be at least 1".into()));
    }
    let len = first.rows.len();
    if let Some(bad) = logs.iter().find(|l| l.rows.len() != len) {
        return Err(Error::Argument(format!(
            "ragged logs: repetition {} has {} episodes, repetition {} has {len}",
            bad.repetition,
            bad.rows.len(),
            first.repetition
        )));
    }
    let n = logs.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|e| logs.iter().map(|l| l.rows[e].total_return).sum::<f64>() / n)
        .collect();
    let smoothed = moving_average(&mean, window);
    Ok(AggregateCurve {
        mean,
        smoothed,
        window,
        num_repetitions: logs.len(),
    })
}

/// Trailing mean over up to `window` values ending at each index.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let w = &values[(i + 1).saturating_sub(window)..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

/// Means over complete windows only: element `i` covers `values[i..i + window]`.
pub fn full_window_means(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    values.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}

impl AggregateCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut file = std::io::BufWriter::new(file);
        writeln!(file, "# repetitions={} window={}", self.num_repetitions, self.window).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["episode", "mean_return", "smoothed_return"])?;
        for (e, (m, s)) in self.mean.iter().zip(&self.smoothed).enumerate() {
            w.write_record([e.to_string(), m.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round tick step covering `span` in roughly five intervals.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Renders one line per curve against episode index as a standalone SVG.
pub fn render_svg(curves: &[Vec<f64>], labels: &[String], title: &str) -> Result<String> {
    if curves.is_empty() || curves.iter().any(Vec::is_empty) {
        return Err(Error::Argument("every curve needs at least one point".into()));
    }
    if labels.len() != curves.len() {
        return Err(Error::Argument(format!("{} labels for {} curves", labels.len(), curves.len())));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::Argument("curves in one plot must have equal length".into()));
    }
    if curves.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("curves must be finite".into()));
    }
    let mut lo = curves.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let mut hi = curves.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let y_step = tick_step(hi - lo);
    let y_lo = (lo / y_step).floor() * y_step;
    let y_hi = (hi / y_step).ceil() * y_step;
    let x_hi = (len.max(2) - 1) as f64;
    let x_step = tick_step(x_hi).max(1.0);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x / x_hi * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let mut y = y_lo;
    while y <= y_hi + y_step * 1e-9 {
        let yy = py(y);
        let _ = writeln!(
            w,
            r##"<line x1="{LEFT:.1}" y1="{yy:.2}" x2="{:.1}" y2="{yy:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            yy + 4.0,
            fmt_tick(y)
        );
        y += y_step;
    }
    let mut x = 0.0;
    while x <= x_hi + 1e-9 {
        let xx = px(x);
        let _ = writeln!(
            w,
            r##"<line x1="{xx:.2}" y1="{:.1}" x2="{xx:.2}" y2="{:.1}" stroke="#000000"/>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{xx:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            fmt_tick(x)
        );
        x += x_step;
    }
    let _ = writeln!(
        w,
        r##"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#000000"/>"##
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">episode</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">return</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (k, (curve, label)) in curves.iter().zip(labels).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = if curve.len() == 1 {
            vec![format!("{:.2},{:.2}", px(0.0), py(curve[0])), format!("{:.2},{:.2}", px(x_hi), py(curve[0]))]
        } else {
            curve
                .iter()
                .enumerate()
                .map(|(i, &v)| format!("{:.2},{:.2}", px(i as f64), py(v)))
                .collect()
        };
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#,
            lx + 22.0
        );
        let _ = writeln!(w, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 28.0, ly + 4.0, escape(label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes [`render_svg`] output to `path`.
pub fn emit_plot(curves: &[Vec<f64>], labels: &[String], title: &str, path: &Path) -> Result<()> {
    let svg = render_svg(curves, labels, title)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
