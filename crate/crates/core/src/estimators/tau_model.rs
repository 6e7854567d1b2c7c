//! Individual-level treatment effect models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ExperimentalSample;
use crate::error::{Error, Result};
use crate::linalg;

/// Maps a full covariate row to a predicted individual treatment effect.
pub trait TauModel: Send + Sync {
    fn predict(&self, row: &[f64]) -> f64;

    fn predict_all(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.nrows());
        let mut buf = vec![0.0; x.ncols()];
        for i in 0..x.nrows() {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = x[(i, j)];
            }
            let v = self.predict(&buf);
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("tau model prediction is not finite at row {}", i + 1)));
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// The constant-zero model; reduces the augmented estimator to the weighted one.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTau;

impl TauModel for ZeroTau {
    fn predict(&self, _row: &[f64]) -> f64 {
        0.0
    }
}

/// T-learner: separate least-squares fits per arm on a subset of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTauModel {
    pub columns: Vec<usize>,
    /// Intercept followed by slopes for `columns`.
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
}

impl LinearTauModel {
    /// Effect coefficients: intercept then slopes (treated minus control).
    pub fn effect_coefficients(&self) -> Vec<f64> {
        self.treated.iter().zip(&self.control).map(|(a, b)| a - b).collect()
    }
}

impl TauModel for LinearTauModel {
    fn predict(&self, row: &[f64]) -> f64 {
        let slopes = self.treated[1..].iter().zip(&self.control[1..]);
        (self.treated[0] - self.control[0])
            + self.columns.iter().zip(slopes).map(|(&j, (a, b))| (a - b) * row[j]).sum::<f64>()
    }
}

fn ols(x: &DMatrix<f64>, y: &[f64], names: &[String], columns: &[usize], arm: &str) -> Result<Vec<f64>> {
    let n = x.nrows();
    let k = columns.len();
    if n < k + 1 {
        return Err(Error::RankDeficient(vec![format!("{arm} arm has {n} rows for {} coefficients", k + 1)]));
    }
    let sub = x.select_columns(columns);
    let dependent = linalg::dependent_columns(&sub);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent.iter().map(|&j| format!("{} ({arm} arm)", names[columns[j]])).collect()));
    }
    let d = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { sub[(i, j - 1)] });
    let qr = d.qr();
    let qty = qr.q().tr_mul(&DVector::from_column_slice(y));
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(vec![format!("{arm} arm design")]))?;
    Ok(beta.iter().copied().collect())
}

pub fn fit_linear_tau_model(sample: &ExperimentalSample) -> Result<LinearTauModel> {
    let all: Vec<usize> = (0..sample.p()).collect();
    fit_linear_tau_model_on(sample, &all)
}

pub fn fit_linear_tau_model_on(sample: &ExperimentalSample, columns: &[usize]) -> Result<LinearTauModel> {
    let rows = |arm: bool| -> Vec<usize> { (0..sample.n()).filter(|&i| sample.treatment[i] == arm).collect() };
    let fit = |arm: bool, label: &str| {
        let idx = rows(arm);
        let x = sample.covariates.select_rows(&idx);
        let y: Vec<f64> = idx.iter().map(|&i| sample.outcome[i]).collect();
        ols(&x, &y, &sample.covariate_names, columns, label)
    };
    Ok(LinearTauModel { columns: columns.to_vec(), treated: fit(true, "treated")?, control: fit(false, "control")? })
}
