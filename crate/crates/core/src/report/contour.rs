//! Bias contour plot over (R², ρ).

use super::svg::{decimals_for, iso_segments, nice_levels, num, Frame, Svg};
use crate::error::{Error, Result};
use crate::sensitivity::ContourGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellLayer {
    /// Draw one polygon per grid point when the grid has at most this many points.
    Auto(usize),
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourStyle {
    pub levels: usize,
    pub cell_layer: CellLayer,
}

impl Default for ContourStyle {
    fn default() -> Self {
        Self { levels: 8, cell_layer: CellLayer::Auto(2500) }
    }
}

const KILLER_FILL: &str = "#f4b6b6";
const SAFE_FILL: &str = "#eef2f7";

/// Extent of the cell around each axis point: half-way to its neighbours, clipped to the axis.
fn cell_edges(axis: &[f64]) -> Vec<(f64, f64)> {
    let n = axis.len();
    (0..n)
        .map(|k| {
            let lo = if k == 0 { axis[0] } else { 0.5 * (axis[k - 1] + axis[k]) };
            let hi = if k + 1 == n { axis[n - 1] } else { 0.5 * (axis[k] + axis[k + 1]) };
            (lo, hi)
        })
        .collect()
}

fn lerp_axis(axis: &[f64], t: f64) -> f64 {
    let k = (t.floor() as usize).min(axis.len() - 2);
    axis[k] + (t - k as f64) * (axis[k + 1] - axis[k])
}

/// Renders the bias surface with the killer region, iso-bias lines and benchmark points.
pub fn render_contour(grid: &ContourGrid, style: &ContourStyle) -> Result<String> {
    let (nr, nc) = (grid.rho_axis.len(), grid.r2_axis.len());
    if nr < 2 || nc < 2 || grid.bias.len() != nr || grid.bias.iter().any(|r| r.len() != nc) {
        return Err(Error::InvalidParameter("contour grid needs at least 2x2 points and a matching bias matrix".into()));
    }
    let f = Frame { x0: grid.r2_axis[0], x1: grid.r2_axis[nc - 1], y0: grid.rho_axis[0], y1: grid.rho_axis[nr - 1] };
    let mut svg = Svg::new("Bias of the weighted estimate over (R2, rho)");
    let xe = cell_edges(&grid.r2_axis);
    let ye = cell_edges(&grid.rho_axis);
    let rect = |j0: usize, j1: usize, i: usize| {
        let (x0, x1) = (f.px(xe[j0].0), f.px(xe[j1].1));
        let (y0, y1) = (f.py(ye[i].0), f.py(ye[i].1));
        [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    };

    let cells = match style.cell_layer {
        CellLayer::Always => true,
        CellLayer::Never => false,
        CellLayer::Auto(max) => nr * nc <= max,
    };
    if cells {
        svg.raw(r#"<g class="cells">"#);
        for i in 0..nr {
            for j in 0..nc {
                let fill = if grid.killer_mask[i][j] { KILLER_FILL } else { SAFE_FILL };
                svg.polygon("cell", &format!(r#"fill="{fill}""#), &rect(j, j, i));
            }
        }
        svg.raw("</g>");
    } else {
        // Union of killer cells as one polygon per run along each row.
        svg.raw(r#"<g class="killer-region">"#);
        for i in 0..nr {
            let mut j = 0;
            while j < nc {
                if grid.killer_mask[i][j] {
                    let start = j;
                    while j + 1 < nc && grid.killer_mask[i][j + 1] {
                        j += 1;
                    }
                    svg.polygon("killer", &format!(r#"fill="{KILLER_FILL}""#), &rect(start, j, i));
                }
                j += 1;
            }
        }
        svg.raw("</g>");
    }

    let (lo, hi) = grid
        .bias
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (levels, step) = nice_levels(lo, hi, style.levels);
    let dec = decimals_for(step);
    let to_px = |p: (f64, f64)| (f.px(lerp_axis(&grid.r2_axis, p.0)), f.py(lerp_axis(&grid.rho_axis, p.1)));
    svg.raw(r#"<g class="iso-bias">"#);
    for &level in &levels {
        let segs = iso_segments(&grid.bias, level);
        if segs.is_empty() {
            continue;
        }
        let d: Vec<String> = segs
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (to_px(a), to_px(b));
                format!("M{} {}L{} {}", num(a.0), num(a.1), num(b.0), num(b.1))
            })
            .collect();
        svg.path("iso", &d.join(""), "#555555", r#" stroke-width="0.8""#);
        // Label at the rightmost point of the line, ties to the lowest.
        let a = segs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .fold(segs[0].0, |best, p| if p.0 > best.0 || (p.0 == best.0 && p.1 < best.1) { p } else { best });
        let p = to_px(a);
        svg.text(p.0 - 3.0, p.1 - 3.0, "end", &format!("{level:.dec$}"), r##" fill="#333333""##);
    }
    svg.raw("</g>");

    let threshold = grid.estimate * match grid.criterion {
        crate::sensitivity::KillerCriterion::Nullify => grid.q,
        crate::sensitivity::KillerCriterion::SignFlip => 1.0,
    };
    let segs = iso_segments(&grid.bias, threshold);
    if !segs.is_empty() {
        let d: Vec<String> = segs
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (to_px(a), to_px(b));
                format!("M{} {}L{} {}", num(a.0), num(a.1), num(b.0), num(b.1))
            })
            .collect();
        svg.path("threshold", &d.join(""), "#b22222", r#" stroke-width="1.6""#);
    }

    svg.raw(r#"<g class="benchmarks">"#);
    for b in &grid.benchmark_points {
        let p = (f.px(b.r2.clamp(f.x0, f.x1)), f.py(b.rho.clamp(f.y0, f.y1)));
        svg.circle("benchmark", p, 3.0, "#1f3b73");
        svg.text(p.0 + 5.0, p.1 - 4.0, "start", &b.label, "");
    }
    svg.raw("</g>");

    svg.axes(&f, "R2 of the weight error", "correlation of the weight error with tau", 5);
    svg.text(
        320.0,
        18.0,
        "middle",
        &format!("estimate {}; shaded: adjusted estimate explained away", num(grid.estimate)),
        "",
    );
    Ok(svg.finish())
}
