//! Bias of weighted estimators under an omitted confounder.
//!
//! The bias is parameterized by `R²` (share of ideal-weight variance carried by
//! the weight error ε = w − w*), `ρ` (correlation of ε with the individual
//! effect, or with its residual after a τ-model) and `σ²` (variance of that
//! effect). All moments are plug-in moments over the experimental sample.

mod bounds;
mod contour;

use serde::{Deserialize, Serialize};

pub use bounds::{sigma_tau_bounds, sigma_xi_bound, VarianceBounds, VarianceComponents, XiStats};
pub use contour::{is_killer, killer_region, linspace, BenchmarkPoint, ContourGrid, GridSpec, KillerCriterion};

use crate::data::split_by_arm;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Weighted,
    Augmented,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weighted" => Ok(Self::Weighted),
            "augmented" => Ok(Self::Augmented),
            _ => Err("expected weighted|augmented".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityParams {
    pub r2_eps: f64,
    pub rho: f64,
    /// σ²_τ in weighted mode, σ²_ξ in augmented mode.
    pub sigma2: f64,
    pub var_w: f64,
    /// Variance of the ideal weights; needed only when `r2_eps = 1`.
    pub var_w_star: Option<f64>,
}

impl SensitivityParams {
    pub fn new(r2_eps: f64, rho: f64, sigma2: f64, var_w: f64) -> Self {
        Self { r2_eps, rho, sigma2, var_w, var_w_star: None }
    }
}

/// `ρ · sqrt(var_w · R²/(1−R²) · σ²)`, the exact bias of the Horvitz-Thompson estimator.
pub fn bias(r2: f64, rho: f64, sigma2: f64, var_w: f64) -> f64 {
    rho * (var_w * r2 / (1.0 - r2) * sigma2).sqrt()
}

pub fn bias_weighted(p: &SensitivityParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p.r2_eps) {
        return Err(Error::InvalidParameter(format!("R² must lie in [0, 1], got {}", p.r2_eps)));
    }
    if !(-1.0..=1.0).contains(&p.rho) {
        return Err(Error::InvalidParameter(format!("ρ must lie in [-1, 1], got {}", p.rho)));
    }
    if p.sigma2 < 0.0 || p.var_w < 0.0 {
        return Err(Error::InvalidParameter("σ² and var(w) must be nonnegative".into()));
    }
    if p.r2_eps == 1.0 {
        // All ideal-weight variation is error, so var(ε) = var(w*).
        let vs = p.var_w_star.ok_or_else(|| {
            Error::InvalidParameter("R² = 1 needs the variance of the ideal weights (var_w_star)".into())
        })?;
        return Ok(p.rho * (vs * p.sigma2).sqrt());
    }
    Ok(bias(p.r2_eps, p.rho, p.sigma2, p.var_w))
}

/// Same functional form with ρ and σ² taken relative to the τ-model residual ξ.
pub fn bias_augmented(p: &SensitivityParams) -> Result<f64> {
    bias_weighted(p)
}

/// Robustness value: the common R² = ρ² at which bias equals `q` times the estimate.
///
/// Solves `RV²/(1−RV) = a` with `a = q² est² / (σ² var_w)`; the root is written as
/// `2 / (1 + sqrt(1 + 4/a))`, which avoids cancellation for large `a`.
pub fn robustness_value(estimate: f64, q: f64, sigma2: f64, var_w: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && var_w > 0.0) {
        return Err(Error::InvalidParameter("robustness value needs σ² > 0 and var(w) > 0".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("q must lie in (0, 1], got {q}")));
    }
    Ok(rv_from_a(q * q * estimate * estimate / (sigma2 * var_w)))
}

pub fn rv_from_a(a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if a.is_infinite() {
        1.0
    } else {
        2.0 / (1.0 + (1.0 + 4.0 / a).sqrt())
    }
}

/// Inverse of the robustness value map: `var_w = q² est² (1−RV) / (σ² RV²)`.
pub fn var_w_from_rv(estimate: f64, q: f64, sigma2: f64, rv: f64) -> f64 {
    q * q * estimate * estimate * (1.0 - rv) / (sigma2 * rv * rv)
}

/// Largest |ρ| compatible with the observed correlation between weights and effects.
pub fn rho_bound(cor_w_tau: f64) -> f64 {
    (1.0 - (cor_w_tau * cor_w_tau).clamp(0.0, 1.0)).sqrt()
}

/// An estimate together with any clamp or convention applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

fn clamp_cor(raw: f64, what: &str) -> Flagged {
    if raw.abs() > 1.0 {
        Flagged { value: raw.clamp(-1.0, 1.0), flag: Some(format!("{what} estimate {raw:.6} clamped to [-1, 1]")) }
    } else {
        Flagged { value: raw, flag: None }
    }
}

/// `cov(w, τ)` identified by arm-wise covariances with the outcome.
///
/// Randomization makes `cov(w, Y | T=1) − cov(w, Y | T=0)` estimate `cov(w, Y1) − cov(w, Y0)`.
pub fn arm_split_cov(treatment: &[bool], outcome: &[f64], v: &[f64]) -> f64 {
    let (y1, y0) = split_by_arm(treatment, outcome);
    let (v1, v0) = split_by_arm(treatment, v);
    stats::cov(&v1, &y1) - stats::cov(&v0, &y0)
}

/// Conservative estimate of `cor(w, τ)` with σ² standing in for `var(τ)`.
pub fn cor_w_tau_hat(treatment: &[bool], outcome: &[f64], w: &[f64], sigma2: f64) -> Result<Flagged> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("σ² must be positive".into()));
    }
    let vw = stats::var(w);
    if vw == 0.0 {
        return Ok(Flagged {
            value: 0.0,
            flag: Some("weights are constant: correlation set to 0; use the R² = 1 branch with var(w*)".into()),
        });
    }
    Ok(clamp_cor(arm_split_cov(treatment, outcome, w) / (sigma2 * vw).sqrt(), "cor(w, tau)"))
}

/// `cor(w, ξ)` for ξ = τ − τ̂(X): arm-split `cov(w, τ)` minus `cov(w, τ̂)`.
pub fn cor_w_xi_hat(treatment: &[bool], outcome: &[f64], w: &[f64], tau_hat: &[f64], sigma2_xi: f64) -> Result<Flagged> {
    let vw = stats::var(w);
    if vw == 0.0 {
        return Ok(Flagged { value: 0.0, flag: Some("weights are constant: correlation set to 0".into()) });
    }
    if !(sigma2_xi > 0.0) {
        return Ok(Flagged { value: 0.0, flag: Some("σ²_ξ bound is 0: correlation set to 0".into()) });
    }
    let c = arm_split_cov(treatment, outcome, w) - stats::cov(w, tau_hat);
    Ok(clamp_cor(c / (sigma2_xi * vw).sqrt(), "cor(w, xi)"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub estimate: f64,
    pub q: f64,
    pub rv: f64,
    pub cor_w_tau_hat: f64,
    pub rho_bound: f64,
    pub sigma2_max: f64,
    pub var_w: f64,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

pub fn summarize(estimate: f64, q: f64, sigma2_max: f64, var_w: f64, cor: &Flagged, mode: Mode) -> Result<SensitivitySummary> {
    Ok(SensitivitySummary {
        estimate,
        q,
        rv: robustness_value(estimate, q, sigma2_max, var_w)?,
        cor_w_tau_hat: cor.value,
        rho_bound: rho_bound(cor.value),
        sigma2_max,
        var_w,
        mode,
        flags: cor.flag.iter().cloned().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeScenario {
    pub cor_w_tau: f64,
    pub cor_wstar_tau: Option<f64>,
    pub rho_max: f64,
    /// Largest admissible R²; under a supplied `cor(w*, τ)` this is the larger root.
    pub r2_max: f64,
    /// Both roots when `cor(w*, τ)` is supplied (smaller first).
    pub r2_roots: Option<(f64, f64)>,
    /// |bias| at (ρ_max, R²_max); absent when R²_max = 1 (needs var(w*)).
    pub bias_max: Option<f64>,
    /// |bias| at each root.
    pub bias_roots: Option<(Option<f64>, Option<f64>)>,
}

/// Worst case: ε maximally correlated with τ.
///
/// With `c* = cor(w*, τ)` supplied, R² solves the correlation decomposition at
/// ρ = ρ_max: `R² = 1 − (c c* ± sqrt((1−c*²)(1−c²)))²`.
pub fn extreme_scenario(cor_w_tau: f64, cor_wstar_tau: Option<f64>, sigma2: f64, var_w: f64) -> Result<ExtremeScenario> {
    let c = cor_w_tau;
    if c.abs() > 1.0 {
        return Err(Error::InvalidParameter(format!("cor(w, tau) must lie in [-1, 1], got {c}")));
    }
    let rho_max = rho_bound(c);
    let bias_at = |r2: f64| (r2 < 1.0).then(|| bias(r2, rho_max, sigma2, var_w).abs());
    let default_r2 = 1.0 - c * c;
    match cor_wstar_tau {
        Some(cs) if cs.abs() > 1.0 => Err(Error::InvalidParameter(format!("cor(w*, tau) must lie in [-1, 1], got {cs}"))),
        Some(cs) if cs.abs() < 1.0 => {
            let root = ((1.0 - cs * cs) * (1.0 - c * c)).sqrt();
            let a = 1.0 - (c * cs + root).powi(2);
            let b = 1.0 - (c * cs - root).powi(2);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
            Ok(ExtremeScenario {
                cor_w_tau: c,
                cor_wstar_tau: Some(cs),
                rho_max,
                r2_max: hi,
                r2_roots: Some((lo, hi)),
                bias_max: bias_at(hi),
                bias_roots: Some((bias_at(lo), bias_at(hi))),
            })
        }
        _ => Ok(ExtremeScenario {
            cor_w_tau: c,
            cor_wstar_tau,
            rho_max,
            r2_max: default_r2,
            r2_roots: None,
            bias_max: bias_at(default_r2),
            bias_roots: None,
        }),
    }
}

/// Share of the unweighted bias that remains after weighting: `|1 − sqrt(1−R²) c / c*|`.
pub fn relative_reduction(r2_eps: f64, cor_w_tau: f64, cor_wstar_tau: f64) -> Result<f64> {
    if cor_wstar_tau == 0.0 {
        return Err(Error::InvalidParameter("cor(w*, tau) must be nonzero".into()));
    }
    Ok((1.0 - (1.0 - r2_eps).sqrt() * cor_w_tau / cor_wstar_tau).abs())
}

/// Adjusted estimate along a fixed `c* = cor(w*, τ)` as R² varies.
///
/// The implied ρ is `(c sqrt(1−R²) − c*) / sqrt(R²)`; returns `None` where |ρ| > 1.
pub fn adjusted_at_cstar(estimate: f64, sigma2: f64, var_w: f64, c: f64, c_star: f64, r2: f64) -> Option<f64> {
    let s = (1.0 - r2).sqrt();
    if r2 <= 0.0 {
        // With no error in the weights c* must equal c.
        return ((c - c_star).abs() <= 1e-12).then_some(estimate);
    }
    let rho = (c * s - c_star) / r2.sqrt();
    if rho.abs() > 1.0 + 1e-12 {
        return None;
    }
    Some(estimate - (c - c_star / s) * (var_w * sigma2).sqrt())
}
