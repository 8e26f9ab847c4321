use std::fmt::Write;

use kdm_helio_core::kdm::DensityGrid;
use kdm_helio_core::stats::SummaryStats;

const WIDTH: f64 = 680.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 72.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

const AXIS_COLOR: &str = "#333333";
const BOX_FILL: &str = "#7eb3d8";
const PDF_COLOR: &str = "#1f77b4";
const CDF_COLOR: &str = "#d62728";

fn plot_width() -> f64 {
    WIDTH - MARGIN_LEFT - MARGIN_RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        // Shortest decimal that distinguishes tick values.
        let s = format!("{v}");
        if s.len() <= 8 {
            s
        } else {
            format!("{v:.3}")
        }
    }
}

/// Tick positions at 1, 2, or 5 times a power of ten, covering [lo, hi].
fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    debug_assert!(hi > lo && target >= 2);
    let span = hi - lo;
    let raw_step = span / (target as f64 - 1.0);
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64 - 1.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * step {
        // Snap near-zero ticks produced by rounding.
        ticks.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    ticks
}

/// Value-to-pixel mapping for one axis, linear or log10.
struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn linear(lo: f64, hi: f64) -> Scale {
        Scale { lo, hi, log: false }
    }

    /// Log scale when everything is positive and spans several decades,
    /// otherwise linear with a little padding.
    fn auto(lo: f64, hi: f64) -> Scale {
        if lo > 0.0 && hi / lo > 1e3 {
            Scale {
                lo: lo.log10().floor(),
                hi: hi.log10().ceil(),
                log: true,
            }
        } else {
            let pad = 0.05 * (hi - lo).max(f64::MIN_POSITIVE);
            Scale::linear(lo - pad, hi + pad)
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn to_y(&self, v: f64) -> f64 {
        MARGIN_TOP + (1.0 - self.frac(v)) * plot_height()
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let mut out = Vec::new();
            let mut d = self.lo;
            while d <= self.hi + 1e-9 {
                out.push((d, format!("1e{d:.0}")));
                d += 1.0;
            }
            out
        } else {
            nice_ticks(self.lo, self.hi, 6)
                .into_iter()
                .map(|t| (t, fmt(t)))
                .collect()
        }
    }
}

fn header(out: &mut String) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
}

fn title(out: &mut String, text: &str) {
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(text)
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn y_axis(out: &mut String, scale: &Scale, label: &str) {
    let x = MARGIN_LEFT;
    let _ = writeln!(
        out,
        "<line x1=\"{x}\" y1=\"{MARGIN_TOP}\" x2=\"{x}\" y2=\"{:.1}\" stroke=\"{AXIS_COLOR}\"/>",
        MARGIN_TOP + plot_height()
    );
    for (v, text) in scale.ticks() {
        let y = if scale.log {
            MARGIN_TOP + (1.0 - (v - scale.lo) / (scale.hi - scale.lo)) * plot_height()
        } else {
            scale.to_y(v)
        };
        let _ = write!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{x}\" y2=\"{y:.1}\" stroke=\"{AXIS_COLOR}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{text}</text>\n",
            x - 5.0,
            x - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\">{}</text>",
        MARGIN_TOP + plot_height() / 2.0,
        MARGIN_TOP + plot_height() / 2.0,
        escape(label)
    );
}

fn x_axis_line(out: &mut String) {
    let y = MARGIN_TOP + plot_height();
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{AXIS_COLOR}\"/>",
        MARGIN_LEFT + plot_width()
    );
}

fn x_label(out: &mut String, label: &str) {
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_width() / 2.0,
        HEIGHT - 12.0,
        escape(label)
    );
}

/// Boxplot of one parameter across radial bins: Tukey whiskers, quartile
/// box, median line, and extrema dots when they escape the whiskers.
pub fn boxplot(parameter: &str, entries: &[(String, SummaryStats)]) -> String {
    let mut out = String::new();
    header(&mut out);
    title(&mut out, &format!("{parameter} by radial distance"));

    let lo = entries.iter().map(|(_, s)| s.min).fold(f64::INFINITY, f64::min);
    let hi = entries
        .iter()
        .map(|(_, s)| s.max)
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = Scale::auto(lo, hi);
    y_axis(&mut out, &scale, parameter);
    x_axis_line(&mut out);
    x_label(&mut out, "radial distance");

    let slot = plot_width() / entries.len() as f64;
    let box_w = (slot * 0.5).min(48.0);
    for (i, (label, s)) in entries.iter().enumerate() {
        let cx = MARGIN_LEFT + slot * (i as f64 + 0.5);
        let (x0, x1) = (cx - box_w / 2.0, cx + box_w / 2.0);
        let (yq1, yq3) = (scale.to_y(s.q1), scale.to_y(s.q3));
        let (ylo, yhi) = (scale.to_y(s.whisker_low), scale.to_y(s.whisker_high));
        let ymed = scale.to_y(s.median);
        let _ = write!(
            out,
            "<line x1=\"{cx:.1}\" y1=\"{yhi:.1}\" x2=\"{cx:.1}\" y2=\"{yq3:.1}\" stroke=\"{AXIS_COLOR}\"/>\n\
             <line x1=\"{cx:.1}\" y1=\"{yq1:.1}\" x2=\"{cx:.1}\" y2=\"{ylo:.1}\" stroke=\"{AXIS_COLOR}\"/>\n\
             <line x1=\"{:.1}\" y1=\"{yhi:.1}\" x2=\"{:.1}\" y2=\"{yhi:.1}\" stroke=\"{AXIS_COLOR}\"/>\n\
             <line x1=\"{:.1}\" y1=\"{ylo:.1}\" x2=\"{:.1}\" y2=\"{ylo:.1}\" stroke=\"{AXIS_COLOR}\"/>\n\
             <rect x=\"{x0:.1}\" y=\"{yq3:.1}\" width=\"{box_w:.1}\" height=\"{:.1}\" \
             fill=\"{BOX_FILL}\" stroke=\"{AXIS_COLOR}\"/>\n\
             <line x1=\"{x0:.1}\" y1=\"{ymed:.1}\" x2=\"{x1:.1}\" y2=\"{ymed:.1}\" stroke=\"{AXIS_COLOR}\" stroke-width=\"2\"/>\n",
            cx - box_w / 4.0,
            cx + box_w / 4.0,
            cx - box_w / 4.0,
            cx + box_w / 4.0,
            (yq1 - yq3).max(0.5),
        );
        if s.min < s.whisker_low {
            let _ = writeln!(
                out,
                "<circle cx=\"{cx:.1}\" cy=\"{:.1}\" r=\"2\" fill=\"{AXIS_COLOR}\"/>",
                scale.to_y(s.min)
            );
        }
        if s.max > s.whisker_high {
            let _ = writeln!(
                out,
                "<circle cx=\"{cx:.1}\" cy=\"{:.1}\" r=\"2\" fill=\"{AXIS_COLOR}\"/>",
                scale.to_y(s.max)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{}</text>",
            MARGIN_TOP + plot_height() + 16.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str, dashed: bool) {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "" } else { " " });
    }
    let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline points=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>"
    );
}

/// Density and distribution curves of a univariate model: pdf against
/// the left axis, cdf dashed against the right axis.
pub fn curves(parameter: &str, xs: &[f64], pdf: &[f64], cdf: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out);
    title(&mut out, &format!("{parameter} distribution"));

    let pdf_max = pdf.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let y = Scale::linear(0.0, pdf_max * 1.05);
    let x_lo = xs[0];
    let x_hi = xs[xs.len() - 1];
    let to_x = |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_width();

    y_axis(&mut out, &y, "density");
    x_axis_line(&mut out);
    for t in nice_ticks(x_lo, x_hi, 7) {
        let px = to_x(t);
        let base = MARGIN_TOP + plot_height();
        let _ = write!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{base:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"{AXIS_COLOR}\"/>\n\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            base + 5.0,
            base + 18.0,
            fmt(t)
        );
    }
    x_label(&mut out, parameter);

    // Right-hand axis for the cdf.
    let xr = MARGIN_LEFT + plot_width();
    let _ = writeln!(
        out,
        "<line x1=\"{xr:.1}\" y1=\"{MARGIN_TOP}\" x2=\"{xr:.1}\" y2=\"{:.1}\" stroke=\"{CDF_COLOR}\"/>",
        MARGIN_TOP + plot_height()
    );
    for k in 0..=4 {
        let q = k as f64 / 4.0;
        let py = MARGIN_TOP + (1.0 - q) * plot_height();
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{CDF_COLOR}\">{q}</text>",
            xr + 6.0,
            py + 4.0
        );
    }

    let pdf_points: Vec<(f64, f64)> = xs
        .iter()
        .zip(pdf)
        .map(|(&x, &p)| (to_x(x), y.to_y(p)))
        .collect();
    polyline(&mut out, &pdf_points, PDF_COLOR, false);
    let cdf_points: Vec<(f64, f64)> = xs
        .iter()
        .zip(cdf)
        .map(|(&x, &c)| (to_x(x), MARGIN_TOP + (1.0 - c) * plot_height()))
        .collect();
    polyline(&mut out, &cdf_points, CDF_COLOR, true);
    out.push_str("</svg>\n");
    out
}

/// Five-stop dark-to-bright color ramp, `t` in [0, 1].
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (13.0, 8.0, 135.0),
        (126.0, 3.0, 168.0),
        (204.0, 71.0, 120.0),
        (248.0, 149.0, 64.0),
        (240.0, 249.0, 33.0),
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(STOPS[i].0, STOPS[i + 1].0),
        mix(STOPS[i].1, STOPS[i + 1].1),
        mix(STOPS[i].2, STOPS[i + 1].2)
    )
}

/// Heatmap of a bivariate density grid on a logarithmic color scale
/// spanning the top `decades` decades below the peak.
pub fn heatmap(xlabel: &str, ylabel: &str, grid: &DensityGrid, decades: f64) -> String {
    let mut out = String::new();
    header(&mut out);
    title(&mut out, &format!("{ylabel} vs {xlabel} density"));

    let vmax = grid.max_value().max(f64::MIN_POSITIVE);
    let shade = |v: f64| {
        if v <= 0.0 {
            ramp(0.0)
        } else {
            ramp(((v / vmax).log10() + decades) / decades)
        }
    };

    let nx = grid.nx();
    let ny = grid.ny();
    let cell_w = plot_width() / nx as f64;
    let cell_h = plot_height() / ny as f64;
    for ix in 0..nx {
        for iy in 0..ny {
            let px = MARGIN_LEFT + ix as f64 * cell_w;
            let py = MARGIN_TOP + (ny - 1 - iy) as f64 * cell_h;
            let _ = writeln!(
                out,
                "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                cell_w + 0.05,
                cell_h + 0.05,
                shade(grid.value(ix, iy))
            );
        }
    }

    // Axis extents as corner labels plus a colorbar.
    x_label(&mut out, xlabel);
    let base = MARGIN_TOP + plot_height();
    let _ = write!(
        out,
        "<text x=\"{MARGIN_LEFT}\" y=\"{:.1}\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n\
         <text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{}</text>\n",
        base + 18.0,
        fmt(grid.x[0]),
        MARGIN_LEFT + plot_width(),
        base + 18.0,
        fmt(grid.x[nx - 1]),
        MARGIN_TOP + plot_height() / 2.0,
        MARGIN_TOP + plot_height() / 2.0,
        escape(ylabel),
        MARGIN_LEFT - 6.0,
        base,
        fmt(grid.y[0]),
        MARGIN_LEFT - 6.0,
        MARGIN_TOP + 10.0,
        fmt(grid.y[ny - 1]),
    );
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        let py = MARGIN_TOP + (1.0 - t) * 160.0;
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{py:.1}\" width=\"12\" height=\"8.2\" fill=\"{}\"/>",
            WIDTH - 52.0,
            ramp(t)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">1e-{decades:.0}</text>\n",
        WIDTH - 38.0,
        MARGIN_TOP + 8.0,
        fmt(vmax),
        WIDTH - 38.0,
        MARGIN_TOP + 168.0,
    );
    out.push_str("</svg>\n");
    out
}
