//! Percentile bootstrap interval that refits the weights in each replicate.

use weightsens::data::{align, AnalysisConfig};
use weightsens::estimators::{bootstrap_interval, EstimatorSpec};
use weightsens::sim::{generate, DgpConfig};

fn main() -> weightsens::Result<()> {
    let g = generate(&DgpConfig { n: 800, pop_n: 4000, ..DgpConfig::default() })?;
    let input = align(g.sample, g.population, AnalysisConfig::default())?;
    let spec = EstimatorSpec { style: input.config.estimator, augmented: false };
    let b = bootstrap_interval(&input, spec, 500, input.config.seed)?;
    println!("point {:.4}, 95% interval [{:.4}, {:.4}] from {} replicates ({} failed)", b.point, b.lower, b.upper, b.replicates, b.failed);
    Ok(())
}
