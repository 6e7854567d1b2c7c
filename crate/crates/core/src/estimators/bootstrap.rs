//! Percentile bootstrap with weights refit on every replicate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_with, EstimatorSpec};
use crate::data::{AnalysisInput, ExperimentalSample, TargetPopulation};
use crate::error::{Error, Result};
use crate::stats;
use crate::weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
    pub failed: usize,
    pub seed: u64,
}

/// The replicate's generator: stream `index` of the ChaCha8 keyed by `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn resample(input: &AnalysisInput, rng: &mut ChaCha8Rng) -> AnalysisInput {
    let s = &input.sample;
    let n = s.n();
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let big_n = input.population.size();
    let prow: Vec<usize> = (0..big_n).map(|_| rng.random_range(0..big_n)).collect();
    let sample = ExperimentalSample {
        covariates: s.covariates.select_rows(&rows),
        treatment: rows.iter().map(|&i| s.treatment[i]).collect(),
        outcome: rows.iter().map(|&i| s.outcome[i]).collect(),
        covariate_names: s.covariate_names.clone(),
        external_weights: s.external_weights.as_ref().map(|w| rows.iter().map(|&i| w[i]).collect()),
    };
    let population = TargetPopulation {
        covariates: input.population.covariates.select_rows(&prow),
        covariate_names: input.population.covariate_names.clone(),
    };
    AnalysisInput { sample, population, config: input.config.clone(), flags: vec![] }
}

fn replicate(input: &AnalysisInput, spec: EstimatorSpec, seed: u64, index: u64) -> Result<f64> {
    let mut rng = replicate_rng(seed, index);
    let boot = resample(input, &mut rng);
    boot.sample.validate()?;
    let w = weights::fit_default(&boot)?;
    Ok(estimate_with(&boot, &w, spec)?.value)
}

/// Resamples both datasets independently, refits weights and re-estimates.
///
/// Replicates run in parallel; each draws from its own stream so the result
/// does not depend on scheduling.
pub fn bootstrap_interval(input: &AnalysisInput, spec: EstimatorSpec, replicates: usize, seed: u64) -> Result<BootstrapResult> {
    if replicates < 100 {
        return Err(Error::InvalidParameter(format!("bootstrap needs at least 100 replicates, got {replicates}")));
    }
    let point = estimate_with(input, &weights::fit_default(input)?, spec)?.value;
    let draws: Vec<Result<f64>> =
        (0..replicates as u64).into_par_iter().map(|b| replicate(input, spec, seed, b)).collect();
    let mut values: Vec<f64> = draws.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failed = replicates - values.len();
    if failed * 20 > replicates {
        return Err(Error::BootstrapFailures { failed, total: replicates });
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapResult {
        point,
        lower: stats::percentile(&values, 0.025),
        upper: stats::percentile(&values, 0.975),
        replicates,
        failed,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{align, AnalysisConfig, WeightMethod};
    use nalgebra::DMatrix;

    fn input(y: Vec<f64>) -> AnalysisInput {
        let n = y.len();
        let x = DMatrix::from_fn(n, 1, |i, _| (i % 5) as f64);
        let t = (0..n).map(|i| i % 2 == 0).collect();
        let s = ExperimentalSample::new(x, t, y, vec!["x".into()]).unwrap();
        let p = TargetPopulation::new(DMatrix::from_fn(30, 1, |i, _| (i % 4) as f64 + 0.5), vec!["x".into()]).unwrap();
        let cfg = AnalysisConfig { weight_method: WeightMethod::Entropy, ..AnalysisConfig::default() };
        align(s, p, cfg).unwrap()
    }

    #[test]
    fn constant_outcomes_give_zero_width() {
        let r = bootstrap_interval(&input(vec![0.0; 40]), EstimatorSpec::default(), 100, 1).unwrap();
        assert_eq!((r.lower, r.point, r.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn same_seed_same_interval() {
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64).collect();
        let a = bootstrap_interval(&input(y.clone()), EstimatorSpec::default(), 120, 9).unwrap();
        let b = bootstrap_interval(&input(y), EstimatorSpec::default(), 120, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.lower <= a.upper);
    }

    #[test]
    fn too_few_replicates() {
        assert!(bootstrap_interval(&input(vec![1.0; 40]), EstimatorSpec::default(), 99, 1).is_err());
    }
}
