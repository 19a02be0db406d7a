//! Standalone SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 210.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const MARKERS: [Marker; 4] = [
    Marker::Circle,
    Marker::Square,
    Marker::Triangle,
    Marker::Diamond,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Marker {
    Circle,
    Square,
    Triangle,
    Diamond,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, y)` samples; points that cannot be drawn (non-finite, or
    /// non-positive on a log axis) break the line.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    /// Categorical tick labels at the given x positions; numeric ticks are
    /// generated when `None`.
    pub x_ticks: Option<Vec<(f64, String)>>,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round tick spacing (1, 2 or 5 times a power of ten) giving about `target`
/// ticks over `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

impl LineChart {
    fn drawable(&self, y: f64) -> bool {
        y.is_finite() && (!self.log_y || y > 0.0)
    }

    fn y_value(&self, y: f64) -> f64 {
        if self.log_y {
            y.log10()
        } else {
            y
        }
    }

    pub fn render(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|&(x, y)| x.is_finite() && self.drawable(y))
            .map(|(x, y)| (x, self.y_value(y)))
            .collect();

        let (mut x_lo, mut x_hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.0), hi.max(p.0))
            });
        let (mut y_lo, mut y_hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.1), hi.max(p.1))
            });
        if let Some(ticks) = &self.x_ticks {
            for (x, _) in ticks {
                x_lo = x_lo.min(*x);
                x_hi = x_hi.max(*x);
            }
        }
        if !x_lo.is_finite() {
            (x_lo, x_hi) = (0.0, 1.0);
        }
        if !y_lo.is_finite() {
            (y_lo, y_hi) = if self.log_y { (-6.0, 0.0) } else { (0.0, 1.0) };
        }
        if self.log_y {
            y_lo = y_lo.floor();
            y_hi = y_hi.ceil();
        }
        if x_hi - x_lo < 1e-12 {
            x_lo -= 0.5;
            x_hi += 0.5;
        }
        if y_hi - y_lo < 1e-12 {
            y_lo -= if self.log_y { 1.0 } else { 0.5 };
            y_hi += if self.log_y { 1.0 } else { 0.5 };
        }
        if !self.log_y {
            let pad = 0.05 * (y_hi - y_lo);
            y_lo -= pad;
            y_hi += pad;
        }
        let x_pad = if self.x_ticks.is_some() { 0.5 } else { 0.0 };
        x_lo -= x_pad;
        x_hi += x_pad;

        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.title)
        );

        // grid and ticks
        let _ = writeln!(s, r##"<g class="grid" stroke="#dddddd" stroke-width="1">"##);
        let y_ticks: Vec<(f64, String)> = if self.log_y {
            (y_lo as i64..=y_hi as i64)
                .map(|e| (e as f64, format!("1e{e}")))
                .collect()
        } else {
            linear_ticks(y_lo, y_hi)
                .into_iter()
                .map(|v| (v, fmt_tick(v)))
                .collect()
        };
        let x_ticks: Vec<(f64, String)> = match &self.x_ticks {
            Some(t) => t.clone(),
            None => linear_ticks(x_lo, x_hi)
                .into_iter()
                .map(|v| (v, fmt_tick(v)))
                .collect(),
        };
        for (y, _) in &y_ticks {
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#,
                LEFT,
                sy(*y),
                LEFT + plot_w,
                sy(*y)
            );
        }
        if self.log_y {
            // minor decade lines at 2..9
            for e in y_lo as i64..y_hi as i64 {
                for m in 2..10 {
                    let y = e as f64 + (m as f64).log10();
                    let _ = writeln!(
                        s,
                        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke-opacity="0.4"/>"#,
                        LEFT,
                        sy(y),
                        LEFT + plot_w,
                        sy(y)
                    );
                }
            }
        }
        for (x, _) in &x_ticks {
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#,
                sx(*x),
                TOP,
                sx(*x),
                TOP + plot_h
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
        );
        for (y, label) in &y_ticks {
            let _ = writeln!(
                s,
                r#"<text class="ytick" x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(*y) + 4.0,
                escape(label)
            );
        }
        for (x, label) in &x_ticks {
            let _ = writeln!(
                s,
                r#"<text class="xtick" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(*x),
                TOP + plot_h + 18.0,
                escape(label)
            );
        }
        let _ = writeln!(
            s,
            r#"<text class="xlabel" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text class="ylabel" x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        // series
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let marker = MARKERS[(i / PALETTE.len() + i) % MARKERS.len()];
            let _ = writeln!(
                s,
                r#"<g class="series" data-name="{}">"#,
                escape(&series.name)
            );
            let mut run: Vec<(f64, f64)> = Vec::new();
            let flush = |run: &mut Vec<(f64, f64)>, s: &mut String| {
                if run.len() >= 2 {
                    let coords: Vec<String> = run
                        .iter()
                        .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                        coords.join(" ")
                    );
                }
                run.clear();
            };
            for &(x, y) in &series.points {
                if x.is_finite() && self.drawable(y) {
                    run.push((x, self.y_value(y)));
                } else {
                    flush(&mut run, &mut s);
                }
            }
            flush(&mut run, &mut s);
            for &(x, y) in &series.points {
                if x.is_finite() && self.drawable(y) {
                    s.push_str(&marker_svg(marker, sx(x), sy(self.y_value(y)), color));
                }
            }
            let _ = writeln!(s, "</g>");
        }

        // legend
        let lx = LEFT + plot_w + 15.0;
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let marker = MARKERS[(i / PALETTE.len() + i) % MARKERS.len()];
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line class="legend" x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.8"/>"#,
                lx + 24.0
            );
            s.push_str(&marker_svg(marker, lx + 12.0, ly, color));
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 30.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn marker_svg(marker: Marker, x: f64, y: f64, color: &str) -> String {
    match marker {
        Marker::Circle => {
            format!(r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#)
                + "\n"
        }
        Marker::Square => {
            format!(
                r#"<rect class="marker" x="{:.2}" y="{:.2}" width="7" height="7" fill="{color}"/>"#,
                x - 3.5,
                y - 3.5
            ) + "\n"
        }
        Marker::Triangle => {
            format!(
                r#"<polygon class="marker" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                x,
                y - 4.5,
                x - 4.0,
                y + 3.5,
                x + 4.0,
                y + 3.5
            ) + "\n"
        }
        Marker::Diamond => {
            format!(
                r#"<polygon class="marker" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                x,
                y - 4.5,
                x + 4.5,
                y,
                x,
                y + 4.5,
                x - 4.5,
                y
            ) + "\n"
        }
    }
}
