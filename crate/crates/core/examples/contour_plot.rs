//! Writes a bias contour plot for given summary values.
//!
//! Usage: cargo run --example contour_plot [out.svg]

use weightsens::report::{render_contour, ContourStyle};
use weightsens::sensitivity::{killer_region, rho_bound, BenchmarkPoint, GridSpec};

fn main() -> weightsens::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "contour.svg".into());
    let points = vec![
        BenchmarkPoint { r2: 0.20, rho: -0.49, label: "Black".into() },
        BenchmarkPoint { r2: 0.06, rho: 0.75, label: "Age".into() },
    ];
    let grid = killer_region(1.36, 1.0, 8.4, 0.773, rho_bound(0.07), &GridSpec::default(), points);
    if let Some((r2, rho)) = grid.diagonal_boundary_point() {
        println!("killer boundary meets rho^2 = R2 near ({r2:.3}, {rho:.3})");
    }
    let svg = render_contour(&grid, &ContourStyle::default())?;
    std::fs::write(&out, svg).map_err(|source| weightsens::Error::Io { path: out.clone().into(), source })?;
    println!("wrote {out}");
    Ok(())
}
