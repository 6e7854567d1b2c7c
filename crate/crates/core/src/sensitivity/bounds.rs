//! Bounds on the variance of individual treatment effects.

use serde::{Deserialize, Serialize};

use crate::data::{ExperimentalSample, Sigma2Assumption};
use crate::error::{Error, Result};
use crate::estimators::TauModel;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub var_y1: f64,
    pub var_y0: f64,
    pub mean_tau: f64,
    /// var(Y1) / var(Y0); absent when the control arm is constant.
    pub m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBounds {
    pub lower: f64,
    pub upper: f64,
    pub assumption: Sigma2Assumption,
    pub components: VarianceComponents,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// `∫ (Q1(u) − Q0(g(u)))² du` for step empirical quantile functions, where
/// `g` is the identity (comonotone) or `u ↦ 1 − u` (antimonotone).
///
/// Both quantile functions are constant between the merged breakpoints
/// `{k/n1} ∪ {k/n0}`, so the integral is an exact finite sum.
fn coupling_second_moment(y1: &[f64], y0: &[f64], anti: bool) -> f64 {
    let (n1, n0) = (y1.len(), y0.len());
    let mut cuts: Vec<(usize, usize)> = (0..=n1).map(|k| (k, n1)).chain((0..=n0).map(|k| (k, n0))).collect();
    // Sort fractions k/n exactly by cross-multiplication.
    cuts.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    cuts.dedup_by(|a, b| a.0 * b.1 == b.0 * a.1);
    let q = |sorted: &[f64], u: f64| sorted[((u * sorted.len() as f64) as usize).min(sorted.len() - 1)];
    let terms = cuts.windows(2).map(|pair| {
        let a = pair[0].0 as f64 / pair[0].1 as f64;
        let b = pair[1].0 as f64 / pair[1].1 as f64;
        let mid = 0.5 * (a + b);
        let d = q(y1, mid) - q(y0, if anti { 1.0 - mid } else { mid });
        (b - a) * d * d
    });
    stats::sum(terms)
}

/// Sharp bounds on var(τ) from the extremal couplings of the two arms' outcome
/// distributions, optionally tightened by an assumption on the potential outcomes.
pub fn sigma_tau_bounds(treated: &[f64], control: &[f64], assumption: Sigma2Assumption) -> Result<VarianceBounds> {
    if treated.is_empty() {
        return Err(Error::EmptyArm("treated"));
    }
    if control.is_empty() {
        return Err(Error::EmptyArm("control"));
    }
    let mut y1 = treated.to_vec();
    let mut y0 = control.to_vec();
    y1.sort_by(f64::total_cmp);
    y0.sort_by(f64::total_cmp);
    let var_y1 = stats::var(&y1);
    let var_y0 = stats::var(&y0);
    let mean_tau = stats::mean(&y1) - stats::mean(&y0);
    let components = VarianceComponents { var_y1, var_y0, mean_tau, m: (var_y0 > 0.0).then(|| var_y1 / var_y0) };

    let mut flags = Vec::new();
    let mut clamp = |v: f64, name: &str| {
        if v < 0.0 {
            flags.push(format!("{name} variance bound {v:.3e} clamped to 0"));
            0.0
        } else {
            v
        }
    };
    let mut lower = clamp(coupling_second_moment(&y1, &y0, false) - mean_tau * mean_tau, "lower");
    let mut upper = clamp(coupling_second_moment(&y1, &y0, true) - mean_tau * mean_tau, "upper");
    // The two extremal couplings differ only in cross moments; order them exactly.
    if lower > upper {
        std::mem::swap(&mut lower, &mut upper);
    }

    match assumption {
        Sigma2Assumption::None => {}
        Sigma2Assumption::CovY0TauNonneg => {
            let tight = var_y1 - var_y0;
            if tight < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "cov(Y0, tau) >= 0 needs var(Y1) >= var(Y0); got {var_y1:.6} < {var_y0:.6}"
                )));
            }
            if tight < lower {
                return Err(Error::InvalidParameter(format!(
                    "cov(Y0, tau) >= 0 is incompatible with the arms: var(Y1) - var(Y0) = {tight:.6} is below the coupling lower bound {lower:.6}"
                )));
            }
            upper = upper.min(tight);
        }
        Sigma2Assumption::PoCorrNonneg => upper = upper.min(var_y1 + var_y0),
        Sigma2Assumption::PoCorrNegative => lower = lower.max(var_y1 + var_y0),
    }
    Ok(VarianceBounds { lower, upper, assumption, components, flags })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiStats {
    pub var_tau_hat: f64,
    /// Estimated cov(τ̂, ξ) with ξ = τ − τ̂.
    pub cov_tauhat_xi: f64,
    pub sigma2_xi_max: f64,
    pub clamped: bool,
}

/// Upper bound on the variance of the effect left unexplained by a τ-model.
///
/// `σ²_ξ = σ²_τ − var(τ̂) − 2 cov(τ̂, ξ)`, with `cov(τ̂, τ)` identified by the arm split.
pub fn sigma_xi_bound(sigma2_tau_max: f64, model: &dyn TauModel, sample: &ExperimentalSample) -> Result<XiStats> {
    let tau_hat = model.predict_all(&sample.covariates)?;
    Ok(sigma_xi_from_predictions(sigma2_tau_max, &tau_hat, &sample.treatment, &sample.outcome))
}

pub fn sigma_xi_from_predictions(sigma2_tau_max: f64, tau_hat: &[f64], treatment: &[bool], outcome: &[f64]) -> XiStats {
    let var_tau_hat = stats::var(tau_hat);
    let cov_tauhat_tau = super::arm_split_cov(treatment, outcome, tau_hat);
    let cov_tauhat_xi = cov_tauhat_tau - var_tau_hat;
    let raw = sigma2_tau_max - var_tau_hat - 2.0 * cov_tauhat_xi;
    XiStats { var_tau_hat, cov_tauhat_xi, sigma2_xi_max: raw.max(0.0), clamped: raw < 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ZeroTau;
    use nalgebra::DMatrix;

    #[test]
    fn two_point_marginals() {
        // Couplings of two fair coins: identical draws give τ ≡ 0, opposite draws τ = ±1.
        let b = sigma_tau_bounds(&[0.0, 1.0], &[0.0, 1.0], Sigma2Assumption::None).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 1.0));
    }

    #[test]
    fn constant_control() {
        let y1 = [1.0, 4.0, 2.0, 7.0, 3.0];
        let b = sigma_tau_bounds(&y1, &[2.0, 2.0, 2.0], Sigma2Assumption::None).unwrap();
        let v = stats::var(&y1);
        assert!((b.lower - v).abs() < 1e-12 && (b.upper - v).abs() < 1e-12);
    }

    #[test]
    fn unequal_arm_sizes_match_transport_plan() {
        // y1 sorted (0, 3, 6), y0 sorted (1, 5): comonotone plan on [0,1/3),[1/3,1/2),[1/2,2/3),[2/3,1)
        // pairs (0,1), (3,1), (3,5), (6,5) with masses 1/3, 1/6, 1/6, 1/3.
        let b = sigma_tau_bounds(&[6.0, 0.0, 3.0], &[5.0, 1.0], Sigma2Assumption::None).unwrap();
        let second = (1.0 + 1.0) / 3.0 + (4.0 + 4.0) / 6.0;
        let tau_bar: f64 = 3.0 - 3.0;
        assert!((b.lower - (second - tau_bar * tau_bar)).abs() < 1e-12);
    }

    #[test]
    fn assumption_tightening() {
        // Symmetric two-point arms with var(Y1) = 3 and var(Y0) = 1.
        let s = 3f64.sqrt();
        let y1 = [-s, s, -s, s];
        let y0 = [-1.0, 1.0, -1.0, 1.0];
        assert!((stats::var(&y1) - 3.0).abs() < 1e-12);
        let b = sigma_tau_bounds(&y1, &y0, Sigma2Assumption::CovY0TauNonneg).unwrap();
        assert!((b.upper - 2.0).abs() < 1e-12);
        assert!(sigma_tau_bounds(&y0, &y1, Sigma2Assumption::CovY0TauNonneg).is_err());
        let b = sigma_tau_bounds(&y1, &y0, Sigma2Assumption::PoCorrNonneg).unwrap();
        assert!((b.upper - 4.0).abs() < 1e-12);
        let b = sigma_tau_bounds(&y1, &y0, Sigma2Assumption::PoCorrNegative).unwrap();
        assert!((b.lower - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_model_keeps_sigma2() {
        let s = ExperimentalSample::new(
            DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]),
            vec![true, false, true, false],
            vec![1.0, 2.0, 5.0, 3.0],
            vec!["x".into()],
        )
        .unwrap();
        let xi = sigma_xi_bound(8.4, &ZeroTau, &s).unwrap();
        assert_eq!(xi.sigma2_xi_max, 8.4);
        assert!(!xi.clamped);
    }
}
