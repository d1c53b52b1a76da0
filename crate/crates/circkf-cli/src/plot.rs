//! Minimal static SVG line plots, dependency-free.

use std::io::{self, Write};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 210.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series<'a> {
    pub label: String,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub dashed: bool,
    pub color_idx: usize,
}

pub struct Plot<'a> {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series<'a>>,
}

impl Plot<'_> {
    pub fn write_svg<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for s in &self.series {
            for (&x, &y) in s.x.iter().zip(s.y) {
                if x.is_finite() && y.is_finite() {
                    x_min = x_min.min(tx(x));
                    x_max = x_max.max(tx(x));
                    y_min = y_min.min(y);
                    y_max = y_max.max(y);
                }
            }
        }
        if !x_min.is_finite() || x_max <= x_min {
            x_min = 0.0;
            x_max = 1.0;
        }
        if !y_min.is_finite() || y_max <= y_min {
            y_min = 0.0;
            y_max = 1.0;
        }
        let pad = 0.05 * (y_max - y_min).max(1e-12);
        let (y_min, y_max) = (y_min - pad, y_max + pad);

        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (tx(x) - x_min) / (x_max - x_min) * plot_w;
        let py = |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

        writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        )?;
        writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
        writeln!(
            w,
            r#"<text x="{}" y="22" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            xml_escape(&self.title)
        )?;
        // frame
        writeln!(
            w,
            r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
        )?;
        // axis ticks: 5 per axis
        for i in 0..=4 {
            let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
            let x_val = if self.log_x { 10f64.powf(fx) } else { fx };
            let x_pos = MARGIN_L + plot_w * i as f64 / 4.0;
            writeln!(
                w,
                r##"<line x1="{x_pos}" y1="{}" x2="{x_pos}" y2="{}" stroke="#444"/>"##,
                MARGIN_T + plot_h,
                MARGIN_T + plot_h + 5.0
            )?;
            writeln!(
                w,
                r#"<text x="{x_pos}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
                MARGIN_T + plot_h + 20.0,
                format_tick(x_val)
            )?;
            let y_val = y_min + (y_max - y_min) * i as f64 / 4.0;
            let y_pos = py(y_val);
            writeln!(
                w,
                r##"<line x1="{}" y1="{y_pos}" x2="{MARGIN_L}" y2="{y_pos}" stroke="#444"/>"##,
                MARGIN_L - 5.0
            )?;
            writeln!(
                w,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                MARGIN_L - 9.0,
                y_pos + 4.0,
                format_tick(y_val)
            )?;
        }
        writeln!(
            w,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            HEIGHT - 12.0,
            xml_escape(&self.x_label)
        )?;
        writeln!(
            w,
            r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            MARGIN_T + plot_h / 2.0,
            MARGIN_T + plot_h / 2.0,
            xml_escape(&self.y_label)
        )?;

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[s.color_idx % PALETTE.len()];
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let points: Vec<String> = s
                .x
                .iter()
                .zip(s.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            writeln!(
                w,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
                points.join(" ")
            )?;
            let ly = MARGIN_T + 16.0 * (i as f64 + 1.0);
            writeln!(
                w,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
                WIDTH - MARGIN_R + 10.0,
                WIDTH - MARGIN_R + 40.0
            )?;
            writeln!(
                w,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
                WIDTH - MARGIN_R + 46.0,
                ly + 4.0,
                xml_escape(&s.label)
            )?;
        }
        writeln!(w, "</svg>")
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
