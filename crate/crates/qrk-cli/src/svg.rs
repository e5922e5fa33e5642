//! Minimal SVG rendering: log-scale convergence curves and true/false grids.
//! Every plotted point also exists in a CSV; these files are views only.

/// Squared errors of zero cannot sit on a log axis; floor them for plotting.
pub const LOG_FLOOR: f64 = 1e-300;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#e377c2",
    "#7f7f7f",
];

pub fn series_color(idx: usize) -> &'static str {
    PALETTE[idx % PALETTE.len()]
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: Option<String>,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub opacity: f64,
    pub dashed: bool,
    pub width: f64,
}

impl Series {
    pub fn line(label: &str, color: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: Some(label.to_string()),
            points,
            color: color.to_string(),
            opacity: 1.0,
            dashed: false,
            width: 1.6,
        }
    }

    /// Translucent per-trial polyline; stacked opacity approximates the
    /// density cloud of trial errors.
    pub fn cloud(color: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: None,
            points,
            color: color.to_string(),
            opacity: 0.18,
            dashed: false,
            width: 0.8,
        }
    }

    pub fn bound(label: &str, color: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: Some(label.to_string()),
            points,
            color: color.to_string(),
            opacity: 0.9,
            dashed: true,
            width: 1.2,
        }
    }
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 36.0;
const MB: f64 = 48.0;

impl LinePlot {
    /// Render with a linear x axis and log10 y axis.
    pub fn render_log_y(&self) -> String {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(y.max(LOG_FLOOR).log10());
            }
        }
        let (x0, x1) = span(&xs);
        let (y0, y1) = span(&ys);
        let sx = |x: f64| ML + (x - x0) / (x1 - x0).max(1e-300) * (W - ML - MR);
        let sy = |ly: f64| H - MB - (ly - y0) / (y1 - y0).max(1e-300) * (H - MT - MB);

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            W / 2.0,
            escape(&self.title)
        ));

        // Axes.
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB,
            W - MR,
            H - MB
        ));
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB
        ));

        // Y ticks on integer powers of ten.
        let lo = y0.floor() as i64;
        let hi = y1.ceil() as i64;
        let step = (((hi - lo) as f64 / 8.0).ceil() as i64).max(1);
        let mut p = lo;
        while p <= hi {
            let y = sy(p as f64);
            if y >= MT - 1.0 && y <= H - MB + 1.0 {
                out.push_str(&format!(
                    "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{ML}\" y2=\"{y:.1}\" stroke=\"black\"/>\n",
                    ML - 4.0
                ));
                out.push_str(&format!(
                    "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">1e{p}</text>\n",
                    ML - 7.0,
                    y + 3.0
                ));
            }
            p += step;
        }

        // X ticks.
        for t in 0..=5 {
            let x = x0 + (x1 - x0) * t as f64 / 5.0;
            let px = sx(x);
            out.push_str(&format!(
                "<line x1=\"{px:.1}\" y1=\"{}\" x2=\"{px:.1}\" y2=\"{}\" stroke=\"black\"/>\n",
                H - MB,
                H - MB + 4.0
            ));
            out.push_str(&format!(
                "<text x=\"{px:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
                H - MB + 16.0,
                format_tick(x)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
            (ML + W - MR) / 2.0,
            H - 10.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            escape(&self.y_label)
        ));

        for s in &self.series {
            if s.points.is_empty() {
                continue;
            }
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.max(LOG_FLOOR).log10())))
                .collect();
            let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-opacity=\"{}\"{}/>\n",
                pts.join(" "),
                s.color,
                s.width,
                s.opacity,
                dash
            ));
        }

        // Legend for labeled series.
        let mut row = 0;
        for s in &self.series {
            if let Some(label) = &s.label {
                let y = MT + 12.0 + 14.0 * row as f64;
                let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
                out.push_str(&format!(
                    "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"{}\" stroke-width=\"2\"{}/>\n",
                    W - MR - 150.0,
                    W - MR - 126.0,
                    s.color,
                    dash
                ));
                out.push_str(&format!(
                    "<text x=\"{}\" y=\"{:.1}\" font-size=\"10\">{}</text>\n",
                    W - MR - 120.0,
                    y + 3.0,
                    escape(label)
                ));
                row += 1;
            }
        }

        out.push_str("</svg>\n");
        out
    }
}

fn span(vals: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn format_tick(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1000.0 || x.abs() < 0.01 {
        format!("{x:.1e}")
    } else {
        format!("{x:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// True/false grid over (q, alpha), q on the horizontal axis.
pub fn render_bool_grid(
    title: &str,
    q_grid: &[f64],
    alpha_grid: &[f64],
    satisfied: impl Fn(usize, usize) -> bool,
) -> String {
    let cell = 36.0;
    let ml = 70.0;
    let mt = 40.0;
    let w = ml + cell * q_grid.len() as f64 + 20.0;
    let h = mt + cell * alpha_grid.len() as f64 + 50.0;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        w / 2.0,
        escape(title)
    ));
    for (i, &q) in q_grid.iter().enumerate() {
        for (j, &alpha) in alpha_grid.iter().enumerate() {
            // Largest alpha on top, as in the reference layout.
            let x = ml + cell * i as f64;
            let y = mt + cell * (alpha_grid.len() - 1 - j) as f64;
            let ok = satisfied(i, j);
            let fill = if ok { "#4caf50" } else { "#ef5350" };
            out.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" stroke=\"white\"/>\n"
            ));
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" fill=\"white\">{}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                if ok { "T" } else { "F" }
            ));
            if i == 0 {
                out.push_str(&format!(
                    "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{alpha:.3}</text>\n",
                    ml - 6.0,
                    y + cell / 2.0 + 3.0
                ));
            }
        }
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{q:.3}</text>\n",
            ml + cell * i as f64 + cell / 2.0,
            mt + cell * alpha_grid.len() as f64 + 14.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">q</text>\n",
        ml + cell * q_grid.len() as f64 / 2.0,
        mt + cell * alpha_grid.len() as f64 + 34.0
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"12\">alpha</text>\n",
        mt + cell * alpha_grid.len() as f64 / 2.0
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_renders_valid_markup() {
        let plot = LinePlot {
            title: "conv".into(),
            x_label: "iter".into(),
            y_label: "sq error".into(),
            series: vec![
                Series::line("a", series_color(0), vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.01)]),
                Series::bound("bound", series_color(1), vec![(0.0, 1.0), (2.0, 0.5)]),
                Series::cloud(series_color(0), vec![(0.0, 1.2), (2.0, 0.02)]),
            ],
        };
        let svg = plot.render_log_y();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
    }

    #[test]
    fn zero_values_are_floored_not_nan() {
        let plot = LinePlot {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            series: vec![Series::line("z", "#000", vec![(0.0, 0.0), (1.0, 1.0)])],
        };
        let svg = plot.render_log_y();
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn bool_grid_has_one_cell_per_pair() {
        let svg = render_bool_grid("t", &[0.2, 0.5], &[0.3, 0.9, 1.0], |i, j| i + j > 1);
        assert_eq!(svg.matches("<rect x=").count(), 6);
    }
}
