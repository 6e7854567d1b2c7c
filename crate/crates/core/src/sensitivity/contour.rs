//! Bias surface over (R², ρ) and the region where a confounder explains away the estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bias;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KillerCriterion {
    /// Adjusted estimate shrinks to within (1 − q)|estimate| of zero, or flips sign.
    Nullify,
    /// Adjusted estimate has the opposite sign.
    SignFlip,
}

impl std::str::FromStr for KillerCriterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nullify" => Ok(Self::Nullify),
            "sign-flip" | "sign_flip" => Ok(Self::SignFlip),
            _ => Err("expected nullify|sign-flip".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r2_points: usize,
    pub rho_points: usize,
    pub r2_cap: f64,
    pub criterion: KillerCriterion,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { r2_points: 400, rho_points: 400, r2_cap: 0.99, criterion: KillerCriterion::Nullify }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPoint {
    pub r2: f64,
    pub rho: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub estimate: f64,
    pub q: f64,
    pub criterion: KillerCriterion,
    pub r2_axis: Vec<f64>,
    pub rho_axis: Vec<f64>,
    /// `bias[i][j]` at `(r2_axis[j], rho_axis[i])`.
    pub bias: Vec<Vec<f64>>,
    pub killer_mask: Vec<Vec<bool>>,
    pub benchmark_points: Vec<BenchmarkPoint>,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { hi } else { lo + step * k as f64 }).collect()
}

pub fn is_killer(estimate: f64, bias: f64, q: f64, criterion: KillerCriterion) -> bool {
    let signed = (estimate - bias) * estimate.signum();
    match criterion {
        KillerCriterion::Nullify => signed <= (1.0 - q) * estimate.abs(),
        KillerCriterion::SignFlip => signed < 0.0,
    }
}

/// Evaluates the bias on the grid; rows (fixed ρ) are computed in parallel.
#[allow(clippy::too_many_arguments)]
pub fn killer_region(
    estimate: f64,
    q: f64,
    sigma2: f64,
    var_w: f64,
    rho_bound: f64,
    spec: &GridSpec,
    benchmark_points: Vec<BenchmarkPoint>,
) -> ContourGrid {
    assert!(spec.r2_points >= 2 && spec.rho_points >= 2, "grid needs at least 2 points per axis");
    assert!(spec.r2_cap < 1.0, "R² cap must be below 1");
    let r2_axis = linspace(0.0, spec.r2_cap, spec.r2_points);
    let m = (spec.rho_points - 1) as f64;
    // Built from the centre so that rho_axis[k] = -rho_axis[n-1-k] exactly.
    let rho_axis: Vec<f64> =
        (0..spec.rho_points).map(|k| rho_bound * (((2 * k) as f64 - m) / m)).collect();
    let bias_rows: Vec<Vec<f64>> =
        rho_axis.par_iter().map(|&rho| r2_axis.iter().map(|&r2| bias(r2, rho, sigma2, var_w)).collect()).collect();
    let killer_mask =
        bias_rows.iter().map(|row| row.iter().map(|&b| is_killer(estimate, b, q, spec.criterion)).collect()).collect();
    ContourGrid {
        estimate,
        q,
        criterion: spec.criterion,
        r2_axis,
        rho_axis,
        bias: bias_rows,
        killer_mask,
        benchmark_points,
    }
}

impl ContourGrid {
    /// Killer grid points with at least one non-killer 4-neighbour.
    pub fn boundary_points(&self) -> Vec<(usize, usize)> {
        let (nr, nc) = (self.rho_axis.len(), self.r2_axis.len());
        let mut out = Vec::new();
        for i in 0..nr {
            for j in 0..nc {
                if !self.killer_mask[i][j] {
                    continue;
                }
                let neighbours = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
                if neighbours.iter().any(|&(a, b)| a < nr && b < nc && !self.killer_mask[a][b]) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// The boundary point on the estimate's side of ρ closest to the diagonal ρ² = R².
    pub fn diagonal_boundary_point(&self) -> Option<(f64, f64)> {
        let side = if self.estimate >= 0.0 { 1.0 } else { -1.0 };
        self.boundary_points()
            .into_iter()
            .map(|(i, j)| (self.r2_axis[j], self.rho_axis[i]))
            .filter(|&(_, rho)| rho * side > 0.0)
            .min_by(|a, b| (a.1 * a.1 - a.0).abs().total_cmp(&(b.1 * b.1 - b.0).abs()))
    }
}
