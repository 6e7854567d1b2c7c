//! Worst-case bias and adjusted-estimate curves for fixed cor(w*, tau).

use weightsens::report::{extreme_curves, DEFAULT_C_STAR};
use weightsens::sensitivity::extreme_scenario;

fn main() -> weightsens::Result<()> {
    let (estimate, sigma2, var_w, c) = (1.36, 8.4, 0.773, 0.07);
    let e = extreme_scenario(c, None, sigma2, var_w)?;
    println!("rho_max {:.4}, R2_max {:.4}, |bias| {:.4}", e.rho_max, e.r2_max, e.bias_max.unwrap_or(f64::NAN));
    for cs in [0.25, 0.5] {
        let e = extreme_scenario(c, Some(cs), sigma2, var_w)?;
        println!("c* = {cs}: R2 roots {:.4?}", e.r2_roots.unwrap());
    }
    for curve in extreme_curves(estimate, sigma2, var_w, c, &DEFAULT_C_STAR) {
        println!("c* = {:>5}: {}", curve.c_star, if curve.sign_flip_risk { "can flip the sign" } else { "keeps the sign" });
    }
    Ok(())
}
