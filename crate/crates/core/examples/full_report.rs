//! Runs the whole analysis and prints the text report.

use weightsens::data::{align, AnalysisConfig};
use weightsens::pipeline::{analyze, AnalyzeOptions};
use weightsens::report::{emit_report, Format};
use weightsens::sim::{generate, DgpConfig};

fn main() -> weightsens::Result<()> {
    let g = generate(&DgpConfig::default())?;
    let input = align(g.sample, g.population, AnalysisConfig::default())?;
    let a = analyze(&input, &AnalyzeOptions::default())?;
    print!("{}", emit_report(&a.bundle(&input, "contour.svg"), Format::Text)?);
    Ok(())
}
