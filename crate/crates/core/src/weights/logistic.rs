//! Inverse selection-probability weights from a logistic model of sample membership.

use nalgebra::{DMatrix, DVector};

use super::WeightSet;
use crate::data::WeightMethod;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct IpwOptions {
    pub max_iter: usize,
    /// Largest allowed coefficient change between IRLS iterations.
    pub tol: f64,
}

impl Default for IpwOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-10 }
    }
}

/// Linear predictors beyond this magnitude mean fitted probabilities of 0 or 1.
const SEPARATION_ETA: f64 = 25.0;

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Fitted logistic regression of `S` (sample = 1) on an intercept and the covariates.
#[derive(Debug, Clone)]
pub struct SelectionFit {
    /// Intercept first, then one slope per covariate, on the original scale.
    pub coef: Vec<f64>,
    pub iterations: usize,
    /// Fitted `P(S = 1 | x)` for each sample row.
    pub sample_prob: Vec<f64>,
}

pub fn fit_selection(sample_x: &DMatrix<f64>, population_x: &DMatrix<f64>, opts: &IpwOptions) -> Result<SelectionFit> {
    let (n, p) = sample_x.shape();
    let big_n = population_x.nrows();
    if population_x.ncols() != p {
        return Err(Error::InvalidParameter("sample and population covariate counts differ".into()));
    }
    let rows = n + big_n;
    let stacked = DMatrix::from_fn(rows, p, |i, j| if i < n { sample_x[(i, j)] } else { population_x[(i - n, j)] });
    let dependent = linalg::dependent_columns(&stacked);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent.iter().map(|j| format!("column {j}")).collect()));
    }

    // Standardize on the stacked data for conditioning; coefficients are mapped back at the end.
    let mu: Vec<f64> = stacked.column_iter().map(|c| c.sum() / rows as f64).collect();
    let sd: Vec<f64> = stacked
        .column_iter()
        .zip(&mu)
        .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / rows as f64).sqrt())
        .collect();
    let d = DMatrix::from_fn(rows, p + 1, |i, j| if j == 0 { 1.0 } else { (stacked[(i, j - 1)] - mu[j - 1]) / sd[j - 1] });
    let y = DVector::from_fn(rows, |i, _| if i < n { 1.0 } else { 0.0 });

    let mut beta = DVector::zeros(p + 1);
    beta[0] = (n as f64 / big_n as f64).ln();
    let mut trace = Vec::new();
    let mut eta = &d * &beta;
    for iter in 1..=opts.max_iter {
        let prob = eta.map(sigmoid);
        let wts = prob.map(|q| q * (1.0 - q));
        let mut h = DMatrix::zeros(p + 1, p + 1);
        for i in 0..rows {
            let r = d.row(i).transpose();
            h.ger(wts[i], &r, &r, 1.0);
        }
        let g = d.tr_mul(&(&y - &prob));
        let Some(delta) = linalg::solve_spd(&h, &g) else {
            return Err(if eta.amax() > SEPARATION_ETA { Error::PerfectSeparation } else { singular(iter, trace) });
        };
        beta += &delta;
        eta = &d * &beta;
        let change = delta.amax();
        trace.push(change);
        if change <= opts.tol {
            let mut coef = vec![beta[0]];
            for j in 0..p {
                coef[0] -= beta[j + 1] * mu[j] / sd[j];
                coef.push(beta[j + 1] / sd[j]);
            }
            let sample_prob = (0..n).map(|i| sigmoid(eta[i])).collect();
            return Ok(SelectionFit { coef, iterations: iter, sample_prob });
        }
        if !change.is_finite() {
            break;
        }
    }
    if eta.iter().any(|e| !e.is_finite() || e.abs() > SEPARATION_ETA) {
        return Err(Error::PerfectSeparation);
    }
    let last = trace.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence { method: "logistic IRLS", iterations: trace.len(), last_violation: last, trace })
}

fn singular(iter: usize, trace: Vec<f64>) -> Error {
    Error::NonConvergence { method: "logistic IRLS", iterations: iter, last_violation: f64::NAN, trace }
}

/// Weights `w_i ∝ (1 - p_i) / p_i`, normalized to mean one over the sample.
pub fn ipw_logistic(sample_x: &DMatrix<f64>, population_x: &DMatrix<f64>) -> Result<WeightSet> {
    ipw_logistic_with(sample_x, population_x, &IpwOptions::default())
}

pub fn ipw_logistic_with(sample_x: &DMatrix<f64>, population_x: &DMatrix<f64>, opts: &IpwOptions) -> Result<WeightSet> {
    let fit = fit_selection(sample_x, population_x, opts)?;
    let n = sample_x.nrows() as f64;
    let big_n = population_x.nrows() as f64;
    let odds = n / big_n;
    let raw: Vec<f64> = fit.sample_prob.iter().map(|q| odds * (1.0 - q) / q).collect();
    Ok(WeightSet {
        values: super::normalize(raw)?,
        method: WeightMethod::IpwLogistic,
        converged: true,
        iterations: fit.iterations,
        dual_or_coef: fit.coef,
        objective_trace: Vec::new(),
        columns: (0..sample_x.ncols()).collect(),
    })
}
