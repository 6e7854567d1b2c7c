//! Monte Carlo check of the bias decomposition on the default Gaussian DGP.
//!
//! Usage: cargo run --release --example oracle [replications]

use weightsens::report::sig4;
use weightsens::sim::{discrete::DiscreteModel, oracle_verify, DgpConfig};

fn main() -> weightsens::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let cfg = DgpConfig::default();
    let start = std::time::Instant::now();
    let report = oracle_verify(&cfg, reps)?;
    println!("{reps} replications in {:.1?}, {} failed fits", start.elapsed(), report.failed);
    for c in &report.checks {
        println!(
            "{:<32} analytic {:>10}  empirical {:>10}  tol {:>10}  {}",
            c.name,
            sig4(c.analytic),
            sig4(c.empirical),
            sig4(c.tolerance),
            if c.pass { "PASS" } else { "FAIL" }
        );
    }

    // Same identities on an enumerated binary population, where they hold to rounding.
    let m = DiscreteModel::from_logistic([[0.3, 0.2], [0.1, 0.4]], -0.5, 0.8, -1.1, [[1.0, 3.0], [-0.5, 2.5]], [0.7, 1.9])?;
    println!("\nenumerated population:");
    for id in m.identities() {
        println!("{:<32} |lhs - rhs| = {:.1e}", id.name, id.error());
    }
    Ok(())
}
