//! Bounds on the variance of individual effects under each assumption.

use weightsens::data::Sigma2Assumption;
use weightsens::sensitivity::sigma_tau_bounds;

fn main() {
    let treated = [3.1, 4.0, 5.2, 2.7, 6.3, 4.4, 3.9];
    let control = [2.0, 2.4, 3.1, 1.7, 2.9, 2.2];
    for a in [
        Sigma2Assumption::None,
        Sigma2Assumption::CovY0TauNonneg,
        Sigma2Assumption::PoCorrNonneg,
        Sigma2Assumption::PoCorrNegative,
    ] {
        match sigma_tau_bounds(&treated, &control, a) {
            Ok(b) => println!("{a:?}: [{:.4}, {:.4}]", b.lower, b.upper),
            Err(e) => println!("{a:?}: {e}"),
        }
    }
}
