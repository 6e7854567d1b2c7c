//! Minimal SVG writer and marching squares.
//!
//! All numbers go through fixed-precision formatting so identical inputs give
//! identical bytes.

use std::fmt::Write as _;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Two decimals, never `-0.00`.
pub fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps data coordinates to the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

pub struct Svg {
    buf: String,
}

impl Svg {
    pub fn new(title: &str) -> Self {
        let mut buf = String::new();
        let _ = writeln!(
            buf,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
            w = WIDTH,
            h = HEIGHT
        );
        let _ = writeln!(buf, "<title>{}</title>", escape(title));
        let _ = writeln!(buf, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
        Self { buf }
    }

    pub fn raw(&mut self, s: &str) {
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    /// `attrs` is spliced in verbatim, e.g. `fill="#cccccc"`.
    pub fn polygon(&mut self, class: &str, attrs: &str, points: &[(f64, f64)]) {
        let pts: Vec<String> = points.iter().map(|&(x, y)| format!("{},{}", num(x), num(y))).collect();
        let _ = writeln!(self.buf, r#"<polygon class="{class}" {attrs} points="{}"/>"#, pts.join(" "));
    }

    pub fn line(&mut self, class: &str, a: (f64, f64), b: (f64, f64), stroke: &str, extra: &str) {
        let _ = writeln!(
            self.buf,
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}"{extra}/>"#,
            num(a.0),
            num(a.1),
            num(b.0),
            num(b.1)
        );
    }

    pub fn path(&mut self, class: &str, d: &str, stroke: &str, extra: &str) {
        let _ = writeln!(self.buf, r#"<path class="{class}" d="{d}" fill="none" stroke="{stroke}"{extra}/>"#);
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, body: &str, extra: &str) {
        let _ = writeln!(
            self.buf,
            r#"<text x="{}" y="{}" text-anchor="{anchor}"{extra}>{}</text>"#,
            num(x),
            num(y),
            escape(body)
        );
    }

    pub fn circle(&mut self, class: &str, c: (f64, f64), r: f64, fill: &str) {
        let _ = writeln!(self.buf, r#"<circle class="{class}" cx="{}" cy="{}" r="{}" fill="{fill}"/>"#, num(c.0), num(c.1), num(r));
    }

    /// Frame, ticks and axis titles.
    pub fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str, ticks: usize) {
        let (l, r, b, t) = (f.px(f.x0), f.px(f.x1), f.py(f.y0), f.py(f.y1));
        self.raw(r#"<g class="axes">"#);
        self.polygon("frame", r##"fill="none" stroke="#000000""##, &[(l, b), (r, b), (r, t), (l, t)]);
        for k in 0..=ticks {
            let s = k as f64 / ticks as f64;
            let xv = f.x0 + s * (f.x1 - f.x0);
            let yv = f.y0 + s * (f.y1 - f.y0);
            let (x, y) = (f.px(xv), f.py(yv));
            self.line("tick", (x, b), (x, b + 5.0), "#000000", "");
            self.text(x, b + 18.0, "middle", &num(xv), "");
            self.line("tick", (l - 5.0, y), (l, y), "#000000", "");
            self.text(l - 8.0, y + 4.0, "end", &num(yv), "");
        }
        self.text(0.5 * (l + r), HEIGHT - 12.0, "middle", xlabel, "");
        let cy = 0.5 * (b + t);
        self.text(18.0, cy, "middle", ylabel, &format!(r#" transform="rotate(-90 18 {})""#, num(cy)));
        self.raw("</g>");
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

/// A contour segment in fractional grid coordinates `(column, row)`.
pub type Segment = ((f64, f64), (f64, f64));

/// Marching squares over `z[row][col]` at `level`.
///
/// A corner is "inside" when its value is at least `level`. Saddle cells are
/// resolved by comparing the average of the four corners with the level.
pub fn iso_segments(z: &[Vec<f64>], level: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    if z.len() < 2 || z[0].len() < 2 {
        return out;
    }
    for i in 0..z.len() - 1 {
        for j in 0..z[0].len() - 1 {
            // Corners counter-clockwise from (row i, col j).
            let c = [z[i][j], z[i][j + 1], z[i + 1][j + 1], z[i + 1][j]];
            let pos = [(j as f64, i as f64), ((j + 1) as f64, i as f64), ((j + 1) as f64, (i + 1) as f64), (j as f64, (i + 1) as f64)];
            let inside: Vec<bool> = c.iter().map(|&v| v >= level).collect();
            let cross = |e: usize| -> Option<(f64, f64)> {
                let (a, b) = (e, (e + 1) % 4);
                if inside[a] == inside[b] {
                    return None;
                }
                let t = (level - c[a]) / (c[b] - c[a]);
                Some((pos[a].0 + t * (pos[b].0 - pos[a].0), pos[a].1 + t * (pos[b].1 - pos[a].1)))
            };
            let edges: Vec<(usize, (f64, f64))> = (0..4).filter_map(|e| cross(e).map(|p| (e, p))).collect();
            match edges.len() {
                2 => out.push((edges[0].1, edges[1].1)),
                4 => {
                    let centre = 0.25 * (c[0] + c[1] + c[2] + c[3]) >= level;
                    let p: Vec<(f64, f64)> = edges.iter().map(|e| e.1).collect();
                    if centre == inside[0] {
                        // Corners 0 and 2 connect through the centre; cut off 1 and 3.
                        out.push((p[0], p[1]));
                        out.push((p[2], p[3]));
                    } else {
                        out.push((p[3], p[0]));
                        out.push((p[1], p[2]));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Round levels spanning `[lo, hi]`, about `target` of them.
pub fn nice_levels(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64) {
    if !(hi > lo) {
        return (vec![], 0.0);
    }
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).filter(|v| *v > lo && *v < hi).collect(), step)
}

pub fn decimals_for(step: f64) -> usize {
    if step <= 0.0 || step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_crossing() {
        let z = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let s = iso_segments(&z, 0.5);
        assert_eq!(s, vec![((0.5, 0.0), (0.5, 1.0))]);
    }

    #[test]
    fn saddle_follows_centre_average() {
        // Corners 0 and 2 high; centre average 0.5 is at the level, so it counts as inside.
        let z = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = iso_segments(&z, 0.5);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], ((0.5, 0.0), (1.0, 0.5)));
        let s = iso_segments(&z, 0.6);
        assert_eq!(s[0], ((0.0, 0.4), (0.4, 0.0)));
    }

    #[test]
    fn nice_level_steps() {
        let (l, step) = nice_levels(-1.3, 1.3, 8);
        assert_eq!(step, 0.5);
        assert_eq!(l, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(decimals_for(0.05), 2);
        assert_eq!(num(-0.001), "0.00");
    }
}
