//! Adjusted estimate against R² for fixed values of cor(w*, τ).

use super::svg::{num, Frame, Svg};
use crate::sensitivity::{adjusted_at_cstar, linspace};

/// Symmetric default set of `cor(w*, τ)` values.
pub const DEFAULT_C_STAR: [f64; 6] = [-0.9, -0.5, -0.25, 0.25, 0.5, 0.9];
/// The set as printed in the source table, with 0.25 repeated.
pub const PRINTED_C_STAR: [f64; 6] = [-0.9, -0.5, 0.25, 0.25, 0.5, 0.9];

const SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeCurve {
    pub c_star: f64,
    /// `(R², adjusted estimate)`; `None` where the implied ρ leaves [−1, 1].
    pub points: Vec<(f64, Option<f64>)>,
    /// The curve reaches an adjusted estimate with the opposite sign (or zero).
    pub sign_flip_risk: bool,
}

pub fn extreme_curves(estimate: f64, sigma2: f64, var_w: f64, cor_w_tau: f64, c_star: &[f64]) -> Vec<ExtremeCurve> {
    let r2 = linspace(0.0, 0.99, SAMPLES);
    c_star
        .iter()
        .map(|&cs| {
            let points: Vec<(f64, Option<f64>)> =
                r2.iter().map(|&r| (r, adjusted_at_cstar(estimate, sigma2, var_w, cor_w_tau, cs, r))).collect();
            let sign_flip_risk = points.iter().filter_map(|p| p.1).any(|v| v * estimate.signum() <= 0.0);
            ExtremeCurve { c_star: cs, points, sign_flip_risk }
        })
        .collect()
}

/// One curve per `c*`; curves that reach the opposite sign are dashed red.
pub fn render_extreme_plot(estimate: f64, sigma2: f64, var_w: f64, cor_w_tau: f64, c_star: &[f64]) -> String {
    let curves = extreme_curves(estimate, sigma2, var_w, cor_w_tau, c_star);
    let values = curves.iter().flat_map(|c| c.points.iter().filter_map(|p| p.1));
    let (lo, hi) = values.chain([estimate, 0.0]).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let pad = 0.05 * (hi - lo).max(1e-9);
    let f = Frame { x0: 0.0, x1: 1.0, y0: lo - pad, y1: hi + pad };
    let mut svg = Svg::new("Adjusted estimate for fixed cor(w*, tau)");
    svg.line("zero", (f.px(0.0), f.py(0.0)), (f.px(1.0), f.py(0.0)), "#999999", r#" stroke-dasharray="2 2""#);
    svg.line("estimate", (f.px(0.0), f.py(estimate)), (f.px(1.0), f.py(estimate)), "#000000", "");
    for c in &curves {
        let mut d = String::new();
        let mut pen = false;
        for &(r, v) in &c.points {
            match v {
                Some(v) => {
                    d.push_str(&format!("{}{} {}", if pen { "L" } else { "M" }, num(f.px(r)), num(f.py(v))));
                    pen = true;
                }
                None => pen = false,
            }
        }
        if d.is_empty() {
            continue;
        }
        let (class, stroke, extra) = if c.sign_flip_risk {
            ("curve risk", "#b22222", r#" stroke-dasharray="6 3" stroke-width="1.6""#)
        } else {
            ("curve", "#1f3b73", r#" stroke-width="1.2""#)
        };
        svg.path(class, &d, stroke, extra);
        if let Some(&(r, Some(v))) = c.points.iter().rev().find(|p| p.1.is_some()) {
            svg.text(f.px(r) - 3.0, f.py(v) - 4.0, "end", &format!("c* = {}", num(c.c_star)), "");
        }
    }
    svg.axes(&f, "R2 of the weight error", "adjusted estimate", 5);
    svg.text(320.0, 18.0, "middle", &format!("estimate {}; cor(w, tau) = {}", num(estimate), num(cor_w_tau)), "");
    svg.finish()
}
