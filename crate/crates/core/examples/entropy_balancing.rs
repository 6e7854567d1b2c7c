//! Entropy balancing weights on a simulated sample, with the balance table.

use weightsens::data::{align, AnalysisConfig};
use weightsens::sim::{generate, DgpConfig};
use weightsens::weights::{balance_table, fit_default};

fn main() -> weightsens::Result<()> {
    let g = generate(&DgpConfig::default())?;
    let input = align(g.sample, g.population, AnalysisConfig::default())?;
    let w = fit_default(&input)?;
    println!("converged {} after {} Newton steps, var(w) = {:.4}", w.converged, w.iterations, w.var());
    println!("{:<4} {:>10} {:>10} {:>10} {:>12}", "", "sample", "weighted", "target", "std.diff.w");
    for r in balance_table(&input.sample, &input.population, &w).rows {
        println!(
            "{:<4} {:>10.4} {:>10.4} {:>10.4} {:>12.2e}",
            r.covariate, r.sample_mean, r.weighted_mean, r.population_mean, r.std_diff_weighted
        );
    }
    Ok(())
}
