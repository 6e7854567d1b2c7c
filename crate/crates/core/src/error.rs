use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema column `{0}` is absent from the file header")]
    MissingColumn(String),

    #[error("missing cells in rows {rows:?} (1-based data rows, header excluded)")]
    MissingCells { rows: Vec<usize> },

    #[error("non-numeric cell `{value}` at row {row}, column `{column}`")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("treatment column `{column}` must be coded exactly 0/1; row {row} has `{value}`")]
    TreatmentNotBinary { column: String, row: usize, value: String },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("covariates present in only one dataset: sample-only {sample_only:?}, population-only {population_only:?}")]
    CovariateMismatch {
        sample_only: Vec<String>,
        population_only: Vec<String>,
    },

    #[error("covariates constant in the sample (zero variance): {0:?}")]
    ConstantCovariate(Vec<String>),

    #[error("collinear covariates: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("{method} did not converge after {iterations} iterations (last violation {last_violation:.3e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        last_violation: f64,
        trace: Vec<f64>,
    },

    #[error("perfect separation detected in the selection model")]
    PerfectSeparation,

    #[error("empty treatment arm: {0}")]
    EmptyArm(&'static str),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{failed} of {total} bootstrap replicates failed to fit weights (budget 5%)")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("positivity violated: selection probabilities reach {0:.4} outside the allowed band")]
    Positivity(f64),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}
