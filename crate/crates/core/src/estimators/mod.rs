//! Sample and population treatment effect estimators.

mod bootstrap;
mod tau_model;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_interval, replicate_rng, BootstrapResult};
pub use tau_model::{fit_linear_tau_model, fit_linear_tau_model_on, LinearTauModel, TauModel, ZeroTau};

use crate::data::{AnalysisInput, EstimatorStyle, ExperimentalSample, TargetPopulation};
use crate::error::{Error, Result};
use crate::stats;
use crate::weights::{self, WeightSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Dim,
    Ht,
    Hajek,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PateEstimate {
    pub value: f64,
    pub style: Style,
    pub n1: usize,
    pub n0: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Treated mean minus control mean.
pub fn sate_dim(sample: &ExperimentalSample) -> Result<PateEstimate> {
    let (y1, y0) = sample.arm_outcomes();
    if y1.is_empty() {
        return Err(Error::EmptyArm("treated"));
    }
    if y0.is_empty() {
        return Err(Error::EmptyArm("control"));
    }
    Ok(PateEstimate { value: stats::mean(&y1) - stats::mean(&y0), style: Style::Dim, n1: y1.len(), n0: y0.len(), flags: vec![] })
}

pub fn weighted_pate(sample: &ExperimentalSample, weights: &WeightSet, style: EstimatorStyle) -> Result<PateEstimate> {
    weighted_pate_raw(&sample.treatment, &sample.outcome, &weights.values, style)
}

/// Weighted estimator on raw vectors, shared with the simulation harness.
pub fn weighted_pate_raw(treatment: &[bool], outcome: &[f64], w: &[f64], style: EstimatorStyle) -> Result<PateEstimate> {
    if w.len() != outcome.len() {
        return Err(Error::InvalidWeights(format!("{} weights for {} units", w.len(), outcome.len())));
    }
    let arm = |t: bool| {
        let mut wy = Vec::new();
        let mut ws = Vec::new();
        for i in 0..outcome.len() {
            if treatment[i] == t {
                wy.push(w[i] * outcome[i]);
                ws.push(w[i]);
            }
        }
        (stats::sum(wy.iter().copied()), stats::sum(ws.iter().copied()), wy.len())
    };
    let (sy1, sw1, n1) = arm(true);
    let (sy0, sw0, n0) = arm(false);
    if n1 == 0 {
        return Err(Error::EmptyArm("treated"));
    }
    if n0 == 0 {
        return Err(Error::EmptyArm("control"));
    }
    let value = match style {
        EstimatorStyle::Ht => sy1 / n1 as f64 - sy0 / n0 as f64,
        EstimatorStyle::Hajek => {
            if sw1 <= 0.0 || sw0 <= 0.0 {
                return Err(Error::InvalidWeights("zero total weight in an arm".into()));
            }
            sy1 / sw1 - sy0 / sw0
        }
    };
    let style = match style {
        EstimatorStyle::Ht => Style::Ht,
        EstimatorStyle::Hajek => Style::Hajek,
    };
    Ok(PateEstimate { value, style, n1, n0, flags: vec![] })
}

pub const AUGMENTED_NORMALIZATION_FLAG: &str =
    "augmentation term averages w*tau_hat over all n sample units while the weighted term averages within arms";

/// Weighted estimate plus the model-based correction toward the population.
pub fn augmented_pate(
    sample: &ExperimentalSample,
    population: &TargetPopulation,
    weights: &WeightSet,
    model: &dyn TauModel,
) -> Result<PateEstimate> {
    let base = weighted_pate(sample, weights, EstimatorStyle::Ht)?;
    let ts = model.predict_all(&sample.covariates)?;
    let tp = model.predict_all(&population.covariates)?;
    let n = sample.n() as f64;
    let sample_term = stats::sum(weights.values.iter().zip(&ts).map(|(w, t)| w * t)) / n;
    let value = base.value - sample_term + stats::mean(&tp);
    Ok(PateEstimate {
        value,
        style: Style::Augmented,
        n1: base.n1,
        n0: base.n0,
        flags: vec![AUGMENTED_NORMALIZATION_FLAG.to_string()],
    })
}

/// Which estimate a pipeline run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub style: EstimatorStyle,
    /// Adds the linear T-learner augmentation on top of the Horvitz-Thompson estimate.
    pub augmented: bool,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self { style: EstimatorStyle::Ht, augmented: false }
    }
}

/// Fits weights per the configured method, then estimates.
pub fn point_estimate(input: &AnalysisInput, spec: EstimatorSpec) -> Result<PateEstimate> {
    let w = weights::fit_default(input)?;
    estimate_with(input, &w, spec)
}

pub fn estimate_with(input: &AnalysisInput, w: &WeightSet, spec: EstimatorSpec) -> Result<PateEstimate> {
    if spec.augmented {
        let model = fit_linear_tau_model(&input.sample)?;
        augmented_pate(&input.sample, &input.population, w, &model)
    } else {
        weighted_pate(&input.sample, w, spec.style)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn toy(y: &[f64]) -> ExperimentalSample {
        let x = DMatrix::from_column_slice(y.len(), 1, &(0..y.len()).map(|i| i as f64).collect::<Vec<_>>());
        let t = (0..y.len()).map(|i| i < y.len() / 2).collect();
        ExperimentalSample::new(x, t, y.to_vec(), vec!["x".into()]).unwrap()
    }

    #[test]
    fn difference_in_means() {
        assert_eq!(sate_dim(&toy(&[2.0, 4.0, 1.0, 1.0])).unwrap().value, 2.0);
        assert_eq!(sate_dim(&toy(&[3.0; 4])).unwrap().value, 0.0);
    }

    #[test]
    fn ht_hand_example() {
        let s = toy(&[1.0, 3.0, 2.0, 2.0]);
        let w = WeightSet::external(vec![0.5, 1.5, 0.5, 1.5]).unwrap();
        assert_eq!(weighted_pate(&s, &w, EstimatorStyle::Ht).unwrap().value, 0.5);
        // Arm weight means are 1, so the normalized form agrees.
        assert_eq!(weighted_pate(&s, &w, EstimatorStyle::Hajek).unwrap().value, 0.5);
    }

    #[test]
    fn uniform_weights_reduce_to_dim() {
        let s = toy(&[1.0, 7.0, 2.5, -1.0, 0.0, 4.0]);
        let w = WeightSet::uniform(6);
        let d = sate_dim(&s).unwrap().value;
        assert_eq!(weighted_pate(&s, &w, EstimatorStyle::Ht).unwrap().value, d);
        assert_eq!(weighted_pate(&s, &w, EstimatorStyle::Hajek).unwrap().value, d);
    }

    #[test]
    fn augmented_with_zero_model_is_ht() {
        let s = toy(&[1.0, 3.0, 2.0, 2.0]);
        let p = TargetPopulation::new(DMatrix::from_column_slice(3, 1, &[0.0, 5.0, 9.0]), vec!["x".into()]).unwrap();
        let w = WeightSet::external(vec![0.5, 1.5, 0.5, 1.5]).unwrap();
        let a = augmented_pate(&s, &p, &w, &ZeroTau).unwrap();
        assert_eq!(a.value, weighted_pate(&s, &w, EstimatorStyle::Ht).unwrap().value);
        assert_eq!(a.flags.len(), 1);
    }

    #[test]
    fn augmented_six_row_hand_example() {
        // Treated rows x = 0,1,2 with y = 1,3,5 fit 1 + 2x; control rows x = 3,4,5 with
        // y = 1,1,1 fit 1. So tau_hat(x) = 2x. Uniform weights:
        // dim = 3 - 1 = 2; mean over sample of 2x = 5; population x = (1, 2) gives mean 3.
        // Augmented = 2 - 5 + 3 = 0.
        let s = toy(&[1.0, 3.0, 5.0, 1.0, 1.0, 1.0]);
        let p = TargetPopulation::new(DMatrix::from_column_slice(2, 1, &[1.0, 2.0]), vec!["x".into()]).unwrap();
        let m = fit_linear_tau_model(&s).unwrap();
        let a = augmented_pate(&s, &p, &WeightSet::uniform(6), &m).unwrap();
        assert!(a.value.abs() < 1e-12, "{}", a.value);
    }
}
