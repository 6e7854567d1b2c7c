//! Robustness value and correlation bound from a fitted analysis.

use weightsens::data::{align, AnalysisConfig};
use weightsens::pipeline::sensitivity_run;
use weightsens::sensitivity::Mode;
use weightsens::sim::{generate, DgpConfig};
use weightsens::weights::fit_default;

fn main() -> weightsens::Result<()> {
    let g = generate(&DgpConfig::default())?;
    let input = align(g.sample, g.population, AnalysisConfig::default())?;
    let w = fit_default(&input)?;
    let run = sensitivity_run(&input, &w, Mode::Weighted)?;
    let s = &run.summary;
    println!("estimate {:.4}, var(tau) in [{:.4}, {:.4}]", s.estimate, run.bounds.lower, run.bounds.upper);
    println!("RV {:.4}: a confounder with R2 = rho^2 = RV explains the estimate away", s.rv);
    println!("cor(w, tau) {:.4} caps |rho| at {:.4}", s.cor_w_tau_hat, s.rho_bound);
    for f in &s.flags {
        println!("flag: {f}");
    }
    Ok(())
}
