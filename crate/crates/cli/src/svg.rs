//! Minimal deterministic SVG charts: fixed viewport, fixed palette, fixed
//! number formatting, no timestamps.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub bars: Vec<(String, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let plot_mid = LEFT + (WIDTH - LEFT - RIGHT) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="{plot_mid}" y="{}" text-anchor="middle">{}</text>"#,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let ymid = TOP + (HEIGHT - TOP - BOTTOM) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="16" y="{ymid}" text-anchor="middle" transform="rotate(-90 16 {ymid})">{}</text>"#,
        escape(y_label)
    );
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn axes(out: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64), x_ticks: bool) {
    let (px0, px1, py0, py1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<g stroke="black" fill="none"><path d="M{px0} {py1}V{py0}H{px1}"/></g>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let y = py0 + (py1 - py0) * f;
        let _ = writeln!(
            out,
            r##"<line x1="{px0}" y1="{y:.1}" x2="{px1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            px0 - 6.0,
            y + 4.0,
            tick(y0 + (y1 - y0) * f)
        );
        if x_ticks {
            let x = px0 + (px1 - px0) * f;
            let _ = writeln!(
                out,
                r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#,
                py0 + 18.0,
                tick(x0 + (x1 - x0) * f)
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || (v.fract() == 0.0 && v.abs() < 1e6) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

impl LineChart {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title, &self.x_label, &self.y_label);
        let all = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|(x, y)| x.is_finite() && y.is_finite())
        };
        let xr = range(all().map(|p| p.0));
        let yr = range(all().map(|p| p.1));
        axes(&mut out, xr, yr, true);
        let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - LEFT - RIGHT);
        let sy = |y: f64| HEIGHT - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - TOP - BOTTOM);
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut d = String::new();
            for (x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = write!(d, "{}{:.1} {:.1}", if d.is_empty() { "M" } else { "L" }, sx(*x), sy(*y));
            }
            if !d.is_empty() {
                let _ = writeln!(out, r#"<path d="{d}" stroke="{color}" stroke-width="2" fill="none"/>"#);
            }
            let ly = TOP + 16.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

impl BarChart {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title, "", &self.y_label);
        let hi = self.bars.iter().map(|b| b.1).filter(|v| v.is_finite()).fold(0.0_f64, f64::max);
        let yr = (0.0, if hi > 0.0 { hi } else { 1.0 });
        axes(&mut out, (0.0, 1.0), yr, false);
        let slot = (WIDTH - LEFT - RIGHT) / self.bars.len().max(1) as f64;
        for (i, (name, v)) in self.bars.iter().enumerate() {
            let v = if v.is_finite() { *v } else { 0.0 };
            let h = v / yr.1 * (HEIGHT - TOP - BOTTOM);
            let x = LEFT + slot * i as f64 + slot * 0.15;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/><text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                HEIGHT - BOTTOM - h,
                slot * 0.7,
                PALETTE[i % PALETTE.len()],
                x + slot * 0.35,
                HEIGHT - BOTTOM + 18.0,
                escape(name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
