//! Logistic inverse-probability weights next to entropy balancing.

use weightsens::data::{align, AnalysisConfig, WeightMethod};
use weightsens::sim::{generate, DgpConfig};
use weightsens::stats;
use weightsens::weights::fit_default;

fn main() -> weightsens::Result<()> {
    let g = generate(&DgpConfig::default())?;
    let ipw_cfg = AnalysisConfig { weight_method: WeightMethod::IpwLogistic, ..AnalysisConfig::default() };
    let ipw = fit_default(&align(g.sample.clone(), g.population.clone(), ipw_cfg)?)?;
    let eb = fit_default(&align(g.sample, g.population, AnalysisConfig::default())?)?;
    println!("ipw: {} IRLS steps, coefficients {:.4?}", ipw.iterations, ipw.dual_or_coef);
    println!("ipw var(w) {:.4}, entropy var(w) {:.4}", ipw.var(), eb.var());
    println!("cor(ipw, x-only oracle weights) {:.4}", stats::cor(&ipw.values, &g.x_weights));
    println!("cor(entropy, x-only oracle weights) {:.4}", stats::cor(&eb.values, &g.x_weights));
    Ok(())
}
