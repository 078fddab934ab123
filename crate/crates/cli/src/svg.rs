//! Minimal SVG plots of point sets in the complex plane.

use std::fmt::Write as _;

use num_complex::Complex64;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const TICKS: usize = 5;

pub const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Cross,
}

enum Element {
    Line {
        points: Vec<Complex64>,
        color: &'static str,
        dashed: bool,
    },
    Marker {
        at: Complex64,
        kind: Marker,
        color: &'static str,
    },
}

pub struct Figure {
    title: String,
    elements: Vec<Element>,
    legend: Vec<(String, &'static str)>,
}

impl Figure {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            elements: Vec::new(),
            legend: Vec::new(),
        }
    }

    pub fn line(&mut self, points: Vec<Complex64>, color: &'static str, dashed: bool) -> &mut Self {
        if points.len() > 1 {
            self.elements.push(Element::Line { points, color, dashed });
        }
        self
    }

    pub fn marker(&mut self, at: Complex64, kind: Marker, color: &'static str) -> &mut Self {
        self.elements.push(Element::Marker { at, kind, color });
        self
    }

    pub fn legend(&mut self, label: impl Into<String>, color: &'static str) -> &mut Self {
        self.legend.push((label.into(), color));
        self
    }

    fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.elements.iter().flat_map(|e| match e {
            Element::Line { points, .. } => points.clone(),
            Element::Marker { at, .. } => vec![*at],
        })
    }

    /// Data bounds with 8% padding and equal scaling on both axes.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for z in self.points().filter(|z| z.is_finite()) {
            x0 = x0.min(z.re);
            x1 = x1.max(z.re);
            y0 = y0.min(z.im);
            y1 = y1.max(z.im);
        }
        if x0 > x1 {
            return (-1.0, 1.0, -1.0, 1.0);
        }
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let aspect = (WIDTH - 2.0 * MARGIN) / (HEIGHT - 2.0 * MARGIN);
        let mut half_w = ((x1 - x0) / 2.0).max(1e-6);
        let mut half_h = ((y1 - y0) / 2.0).max(1e-6);
        if half_w / half_h > aspect {
            half_h = half_w / aspect;
        } else {
            half_w = half_h * aspect;
        }
        let pad = 1.08;
        (
            cx - half_w * pad,
            cx + half_w * pad,
            cy - half_h * pad,
            cy + half_h * pad,
        )
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        // frame, ticks and grid
        let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            right - left,
            bottom - top
        );
        for k in 0..=TICKS {
            let t = k as f64 / TICKS as f64;
            let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{top}" x2="{0:.2}" y2="{bottom}" stroke="#dddddd"/><text x="{0:.2}" y="{1}" text-anchor="middle">{2}</text>"##,
                sx(x),
                bottom + 16.0,
                tick(x)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{left}" y1="{0:.2}" x2="{right}" y2="{0:.2}" stroke="#dddddd"/><text x="{1}" y="{0:.2}" text-anchor="end" dominant-baseline="middle">{2}</text>"##,
                sy(y),
                left - 6.0,
                tick(y)
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{left}" y1="{0:.2}" x2="{right}" y2="{0:.2}" stroke="#888888"/>"##,
                sy(0.0)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">Re E</text>"#,
            WIDTH / 2.0,
            HEIGHT - 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">Im E</text>"#,
            HEIGHT / 2.0
        );

        for e in &self.elements {
            match e {
                Element::Line { points, color, dashed } => {
                    let mut d = String::new();
                    let mut pen_down = false;
                    for z in points {
                        if !z.is_finite() {
                            pen_down = false;
                            continue;
                        }
                        let _ = write!(
                            d,
                            "{}{:.2},{:.2} ",
                            if pen_down { 'L' } else { 'M' },
                            sx(z.re),
                            sy(z.im)
                        );
                        pen_down = true;
                    }
                    let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        out,
                        r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                        d.trim_end()
                    );
                }
                Element::Marker { at, kind, color } => {
                    if !at.is_finite() {
                        continue;
                    }
                    let (x, y) = (sx(at.re), sy(at.im));
                    match kind {
                        Marker::Circle => {
                            let _ = writeln!(
                                out,
                                r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="{color}" stroke-width="1.5"/>"#
                            );
                        }
                        Marker::Cross => {
                            let _ = writeln!(
                                out,
                                r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
                                x - 4.0,
                                y - 4.0,
                                x + 4.0,
                                y + 4.0,
                                x - 4.0,
                                y + 4.0,
                                x + 4.0,
                                y - 4.0
                            );
                        }
                    }
                }
            }
        }

        for (i, (label, color)) in self.legend.iter().enumerate() {
            let y = top + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{0}" y1="{y}" x2="{1}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{2}" y="{y}" dominant-baseline="middle">{3}</text>"#,
                right - 150.0,
                right - 130.0,
                right - 124.0,
                escape(label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_paths_and_markers() {
        let mut fig = Figure::new("a < b");
        fig.line(
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0)],
            PALETTE[0],
            false,
        )
        .marker(Complex64::new(0.5, 0.5), Marker::Cross, PALETTE[1])
        .marker(Complex64::new(0.2, 0.1), Marker::Circle, PALETTE[2])
        .legend("arc", PALETTE[0]);
        let svg = fig.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("Re E") && svg.contains("Im E"));
    }

    #[test]
    fn empty_figure_still_renders() {
        let svg = Figure::new("empty").render();
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn non_finite_points_break_the_path() {
        let mut fig = Figure::new("gap");
        fig.line(
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(f64::NAN, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
            ],
            PALETTE[0],
            true,
        );
        let svg = fig.render();
        assert_eq!(svg.matches(" M").count() + svg.matches("\"M").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
    }
}
