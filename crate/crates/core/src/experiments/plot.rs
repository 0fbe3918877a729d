//! Minimal static SVG line charts.
//!
//! Every figure has a sidecar CSV produced from the same filtered point set
//! the SVG draws, so the CSV is exactly what is plotted.

use std::fmt::Write as _;

use crate::numeric::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisScale {
    Linear,
    /// Base 10; non-positive values are dropped before plotting.
    Log,
}

impl AxisScale {
    fn map(self, v: f64) -> f64 {
        match self {
            AxisScale::Linear => v,
            AxisScale::Log => v.log10(),
        }
    }

    fn admits(self, v: f64) -> bool {
        v.is_finite() && (self == AxisScale::Linear || v > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
        }
    }

    /// Keeps about `max_points` points by stride, always keeping the last one.
    pub fn thinned(mut self, max_points: usize) -> Self {
        let n = self.points.len();
        if max_points == 0 || n <= max_points {
            return self;
        }
        let stride = n.div_ceil(max_points);
        let last = self.points[n - 1];
        self.points = self.points.into_iter().step_by(stride).collect();
        if self.points.last() != Some(&last) {
            self.points.push(last);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: AxisScale,
    pub y_scale: AxisScale,
    pub series: Vec<Series>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str, x_scale: AxisScale, y_scale: AxisScale) -> Self {
        Panel {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale,
            y_scale,
            series: Vec::new(),
        }
    }

    pub fn with_series(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    fn plotted(&self) -> Vec<Series> {
        self.series
            .iter()
            .map(|s| Series {
                name: s.name.clone(),
                points: s
                    .points
                    .iter()
                    .copied()
                    .filter(|&(x, y)| self.x_scale.admits(x) && self.y_scale.admits(y))
                    .collect(),
            })
            .collect()
    }
}

/// Panels laid out side by side.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Figure {
    pub panels: Vec<Panel>,
}

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, scale: AxisScale) -> String {
    match scale {
        AxisScale::Linear if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) => format!("{v:.2e}"),
        AxisScale::Linear => {
            let text = format!("{v:.3}");
            text.trim_end_matches('0').trim_end_matches('.').to_string()
        }
        AxisScale::Log => format!("{:.1e}", 10f64.powf(v)),
    }
}

impl Figure {
    pub fn new(panels: Vec<Panel>) -> Self {
        Figure { panels }
    }

    pub fn to_svg(&self) -> String {
        let width = PANEL_W * self.panels.len().max(1) as f64;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{width}" height="{PANEL_H}" fill="white"/>"#);
        for (k, panel) in self.panels.iter().enumerate() {
            render_panel(&mut out, panel, k as f64 * PANEL_W);
        }
        out.push_str("</svg>\n");
        out
    }

    /// `panel,series,x,y` rows for every drawn point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("panel,series,x,y\n");
        for (k, panel) in self.panels.iter().enumerate() {
            for s in panel.plotted() {
                for (x, y) in s.points {
                    let _ = writeln!(out, "{k},{},{},{}", s.name, fmt_f64(x), fmt_f64(y));
                }
            }
        }
        out
    }
}

fn render_panel(out: &mut String, panel: &Panel, x0: f64) {
    let series = panel.plotted();
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let (xlo, xhi) = range(all().map(|(x, _)| panel.x_scale.map(x)));
    let (ylo, yhi) = range(all().map(|(_, y)| panel.y_scale.map(y)));
    let left = x0 + MARGIN_L;
    let right = x0 + PANEL_W - MARGIN_R;
    let top = MARGIN_T;
    let bottom = PANEL_H - MARGIN_B;
    let sx = |v: f64| left + (panel.x_scale.map(v) - xlo) / (xhi - xlo) * (right - left);
    let sy = |v: f64| bottom - (panel.y_scale.map(v) - ylo) / (yhi - ylo) * (bottom - top);

    let _ = writeln!(
        out,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        (left + right) / 2.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        PANEL_H - 12.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        x0 + 16.0,
        (top + bottom) / 2.0,
        x0 + 16.0,
        (top + bottom) / 2.0,
        escape(&panel.y_label)
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = xlo + f * (xhi - xlo);
        let px = left + f * (right - left);
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 16.0,
            tick_label(xv, panel.x_scale)
        );
        let yv = ylo + f * (yhi - ylo);
        let py = bottom - f * (bottom - top);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 4.0,
            py + 4.0,
            tick_label(yv, panel.y_scale)
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if !s.points.is_empty() {
            let mut d = String::new();
            for (j, &(x, y)) in s.points.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, sx(x), sy(y));
            }
            let _ = writeln!(
                out,
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#
            );
        }
        let ly = top + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">{}</text>"#,
            right - 6.0,
            escape(&s.name)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_axis_drops_non_positive_points_from_svg_and_csv() {
        let panel = Panel::new("t", "x", "y", AxisScale::Linear, AxisScale::Log)
            .with_series(Series::new("a", vec![(0.0, 1.0), (1.0, 0.0), (2.0, 0.1)]));
        let fig = Figure::new(vec![panel]);
        let csv = fig.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(!csv.contains(",0.0000000000000000e0\n"));
        let svg = fig.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(" L").count(), 1);
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let s = Series::new("a", (0..1001).map(|i| (i as f64, 1.0)).collect()).thinned(100);
        assert!(s.points.len() <= 102);
        assert_eq!(s.points[0].0, 0.0);
        assert_eq!(s.points.last().unwrap().0, 1000.0);
    }

    #[test]
    fn labels_are_escaped() {
        let panel = Panel::new("a<b", "x", "y", AxisScale::Linear, AxisScale::Linear);
        assert!(Figure::new(vec![panel]).to_svg().contains("a&lt;b"));
    }
}
