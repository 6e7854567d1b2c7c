//! Mean-one sample-selection weights and covariate balance.

mod entropy;
mod logistic;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use entropy::{entropy_balance, entropy_balance_with, EntropyOptions};
pub use logistic::{fit_selection, ipw_logistic, ipw_logistic_with, IpwOptions, SelectionFit};

use crate::data::{AnalysisInput, ExperimentalSample, TargetPopulation, WeightMethod};
use crate::error::{Error, Result};
use crate::{linalg, stats};

pub const MEAN_ONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub values: Vec<f64>,
    pub method: WeightMethod,
    pub converged: bool,
    pub iterations: usize,
    /// Entropy tilt per covariate, or logistic intercept followed by slopes.
    pub dual_or_coef: Vec<f64>,
    /// Dual objective after each accepted Newton step (entropy only).
    pub objective_trace: Vec<f64>,
    /// Covariate columns the fit balanced on.
    pub columns: Vec<usize>,
}

impl WeightSet {
    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
            method: WeightMethod::Uniform,
            converged: true,
            iterations: 0,
            dual_or_coef: Vec::new(),
            objective_trace: Vec::new(),
            columns: Vec::new(),
        }
    }

    /// Imports weights fit elsewhere, rescaled to mean one.
    pub fn external(values: Vec<f64>) -> Result<Self> {
        Ok(Self { values: normalize(values)?, method: WeightMethod::External, ..Self::uniform(0) })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        stats::mean(&self.values)
    }

    pub fn var(&self) -> f64 {
        stats::var(&self.values)
    }
}

/// Rescales positive finite weights to mean one.
pub fn normalize(mut values: Vec<f64>) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidWeights("no weights".into()));
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidWeights(format!("weights must be positive and finite, found {bad}")));
    }
    let m = stats::mean(&values);
    values.iter_mut().for_each(|v| *v /= m);
    Ok(values)
}

/// Fits weights on a subset of covariate columns with the given method.
///
/// `warm_start` is an entropy tilt on the original scale, one entry per column in `columns`.
pub fn fit_weights(
    input: &AnalysisInput,
    method: WeightMethod,
    columns: &[usize],
    warm_start: Option<Vec<f64>>,
) -> Result<WeightSet> {
    let s = &input.sample;
    let xs = s.covariates.select_columns(columns);
    let xp = input.population.covariates.select_columns(columns);
    let named = |err: Error| match err {
        Error::RankDeficient(_) => {
            let stacked = if method == WeightMethod::IpwLogistic {
                let n = s.n();
                DMatrix::from_fn(n + xp.nrows(), xs.ncols(), |i, j| if i < n { xs[(i, j)] } else { xp[(i - n, j)] })
            } else {
                xs.clone()
            };
            Error::RankDeficient(
                linalg::dependent_columns(&stacked)
                    .into_iter()
                    .map(|j| s.covariate_names[columns[j]].clone())
                    .collect(),
            )
        }
        other => other,
    };
    let mut ws = match method {
        WeightMethod::Entropy => {
            let target: Vec<f64> = columns.iter().map(|&j| stats::mean(input.population.covariates.column(j).as_slice())).collect();
            let opts = EntropyOptions { warm_start, ..EntropyOptions::default() };
            entropy_balance_with(&xs, &target, &opts).map_err(named)?
        }
        WeightMethod::IpwLogistic => ipw_logistic(&xs, &xp).map_err(named)?,
        WeightMethod::Uniform => WeightSet::uniform(s.n()),
        WeightMethod::External => {
            let w = s.external_weights.clone().ok_or_else(|| {
                Error::InvalidParameter("external weights requested but no weight column was loaded".into())
            })?;
            if columns.len() != s.p() {
                return Err(Error::InvalidParameter("external weights cannot be refit on a covariate subset".into()));
            }
            WeightSet::external(w)?
        }
    };
    ws.columns = columns.to_vec();
    Ok(ws)
}

/// Fits weights on every covariate with the configured method.
pub fn fit_default(input: &AnalysisInput) -> Result<WeightSet> {
    let all: Vec<usize> = (0..input.sample.p()).collect();
    fit_weights(input, input.config.weight_method, &all, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub sample_mean: f64,
    pub weighted_mean: f64,
    pub population_mean: f64,
    pub std_diff_unweighted: f64,
    pub std_diff_weighted: f64,
    /// Set when the sample standard deviation is zero and both differences are reported as 0.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub rows: Vec<BalanceRow>,
}

pub fn balance_table(sample: &ExperimentalSample, population: &TargetPopulation, weights: &WeightSet) -> BalanceReport {
    balance_from_matrices(&sample.covariates, &population.covariates, &sample.covariate_names, &weights.values)
}

pub fn balance_from_matrices(
    xs: &DMatrix<f64>,
    xp: &DMatrix<f64>,
    names: &[String],
    w: &[f64],
) -> BalanceReport {
    let n = xs.nrows() as f64;
    let rows = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = xs.column(j);
            let col = col.as_slice();
            let sample_mean = stats::mean(col);
            let weighted_mean = stats::sum(col.iter().zip(w).map(|(x, w)| x * w)) / n;
            let population_mean = stats::mean(xp.column(j).as_slice());
            let sd = stats::sample_sd(col);
            let zero_variance = sd == 0.0;
            let std = |m: f64| if zero_variance { 0.0 } else { (m - population_mean) / sd };
            BalanceRow {
                covariate: name.clone(),
                sample_mean,
                weighted_mean,
                population_mean,
                std_diff_unweighted: std(sample_mean),
                std_diff_weighted: std(weighted_mean),
                zero_variance,
            }
        })
        .collect();
    BalanceReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_rejects_nonpositive() {
        assert!(normalize(vec![1.0, 0.0]).is_err());
        assert!(normalize(vec![1.0, f64::NAN]).is_err());
        let v = normalize(vec![2.0, 6.0]).unwrap();
        assert_eq!(v, vec![0.5, 1.5]);
    }

    #[test]
    fn balance_with_uniform_and_constant_column() {
        let xs = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 4.0, 3.0, 4.0]);
        let xp = DMatrix::from_row_slice(2, 2, &[3.0, 5.0, 5.0, 5.0]);
        let names = vec!["a".to_string(), "c".to_string()];
        let r = balance_from_matrices(&xs, &xp, &names, &[1.0; 3]);
        assert_eq!(r.rows[0].weighted_mean, r.rows[0].sample_mean);
        assert_eq!(r.rows[0].std_diff_unweighted, -2.0);
        assert!(r.rows[1].zero_variance);
        assert_eq!(r.rows[1].std_diff_weighted, 0.0);
    }

    #[test]
    fn entropy_weights_balance_exactly() {
        let xs = DMatrix::from_fn(50, 2, |i, j| ((i * (j + 3)) % 7) as f64 + 0.1 * i as f64);
        let target = [3.5, 4.0];
        let w = entropy_balance(&xs, &target).unwrap();
        let xp = DMatrix::from_row_slice(2, 2, &[3.0, 3.0, 4.0, 5.0]);
        let r = balance_from_matrices(&xs, &xp, &["a".into(), "b".into()], &w.values);
        for row in &r.rows {
            assert!(row.std_diff_weighted.abs() <= 1e-8, "{row:?}");
        }
        assert!((w.mean() - 1.0).abs() <= MEAN_ONE_TOL);
    }
}
