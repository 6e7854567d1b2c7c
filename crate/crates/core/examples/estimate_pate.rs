//! Difference in means, Horvitz-Thompson and Hajek estimates against the true PATE.

use weightsens::data::{align, AnalysisConfig, EstimatorStyle};
use weightsens::estimators::{sate_dim, weighted_pate};
use weightsens::sim::{generate, DgpConfig};
use weightsens::weights::fit_default;

fn main() -> weightsens::Result<()> {
    let cfg = DgpConfig::default();
    let g = generate(&cfg)?;
    let input = align(g.sample, g.population, AnalysisConfig::default())?;
    let w = fit_default(&input)?;
    println!("true PATE           {:.4}", cfg.pate());
    println!("difference in means {:.4}", sate_dim(&input.sample)?.value);
    println!("Horvitz-Thompson    {:.4}", weighted_pate(&input.sample, &w, EstimatorStyle::Ht)?.value);
    println!("Hajek               {:.4}", weighted_pate(&input.sample, &w, EstimatorStyle::Hajek)?.value);
    // The X-only weights cannot remove the part of the shift carried by U.
    println!("omitted-U bias      {:.4}", cfg.gamma_u * (cfg.beta1_u - cfg.beta0_u) * (1.0 - cfg.u_cov.iter().map(|c| c * c).sum::<f64>()));
    Ok(())
}
