//! Leave-one-covariate-out benchmarking on a simulated sample.

use weightsens::benchmark::{benchmark_table, parse_subsets, BenchmarkOptions};
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
    let subsets = parse_subsets("x1;x2;x3;x2,x3", &input.sample.covariate_names)?;
    for (ks, kr) in [(1.0, 1.0), (2.0, 1.0)] {
        let opts = BenchmarkOptions { k_sigma: ks, k_rho: kr, exact_inversion: false };
        let t = benchmark_table(&input, &w, &run.summary, &subsets, opts, None)?;
        println!("k_sigma = {ks}, k_rho = {kr}");
        print!("{}", t.to_csv());
    }
    Ok(())
}
