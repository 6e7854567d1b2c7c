//! Experimental sample and target population datasets.

pub mod config;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use config::{AnalysisConfig, EstimatorStyle, KeyValues, Sigma2Assumption, WeightMethod};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalSample {
    pub covariates: DMatrix<f64>,
    pub treatment: Vec<bool>,
    pub outcome: Vec<f64>,
    pub covariate_names: Vec<String>,
    /// Weights imported from a column of the sample file, if requested.
    pub external_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPopulation {
    pub covariates: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sample,
    Population,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Sample(ExperimentalSample),
    Population(TargetPopulation),
}

/// Which file columns play which role.
///
/// With `covariates = None`, every column not claimed by another role is a covariate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub treatment: Option<String>,
    pub outcome: Option<String>,
    pub weights: Option<String>,
    pub covariates: Option<Vec<String>>,
}

impl Schema {
    pub fn sample(treatment: &str, outcome: &str) -> Self {
        Self { treatment: Some(treatment.into()), outcome: Some(outcome.into()), ..Self::default() }
    }

    fn reserved(&self) -> HashSet<&str> {
        [&self.treatment, &self.outcome, &self.weights].into_iter().flatten().map(String::as_str).collect()
    }
}

impl ExperimentalSample {
    pub fn new(
        covariates: DMatrix<f64>,
        treatment: Vec<bool>,
        outcome: Vec<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let s = Self { covariates, treatment, outcome, covariate_names, external_weights: None };
        s.validate()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn arm_sizes(&self) -> (usize, usize) {
        let n1 = self.treatment.iter().filter(|&&t| t).count();
        (n1, self.n() - n1)
    }

    pub fn arm_outcomes(&self) -> (Vec<f64>, Vec<f64>) {
        split_by_arm(&self.treatment, &self.outcome)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.outcome.len();
        if self.treatment.len() != n || self.covariates.nrows() != n {
            return Err(Error::InvalidData("treatment, outcome and covariate row counts differ".into()));
        }
        check_names(&self.covariate_names, self.covariates.ncols())?;
        if self.outcome.iter().chain(self.covariates.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("sample contains non-finite values".into()));
        }
        let (n1, n0) = self.arm_sizes();
        if n1 < 2 || n0 < 2 {
            return Err(Error::InvalidData(format!(
                "each treatment arm needs at least 2 units (treated {n1}, control {n0})"
            )));
        }
        if let Some(w) = &self.external_weights {
            if w.len() != n {
                return Err(Error::InvalidData("external weight column has the wrong length".into()));
            }
        }
        Ok(())
    }
}

impl TargetPopulation {
    pub fn new(covariates: DMatrix<f64>, covariate_names: Vec<String>) -> Result<Self> {
        let p = Self { covariates, covariate_names };
        p.validate()?;
        Ok(p)
    }

    pub fn size(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn column_means(&self) -> Vec<f64> {
        column_means(&self.covariates)
    }

    pub fn validate(&self) -> Result<()> {
        check_names(&self.covariate_names, self.covariates.ncols())?;
        if self.covariates.nrows() < 2 {
            return Err(Error::InvalidData("population needs at least 2 units".into()));
        }
        if self.covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("population contains non-finite values".into()));
        }
        Ok(())
    }
}

pub fn split_by_arm(treatment: &[bool], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (&t, &v) in treatment.iter().zip(values) {
        if t {
            treated.push(v);
        } else {
            control.push(v);
        }
    }
    (treated, control)
}

pub fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| stats::mean(c.as_slice())).collect()
}

fn check_names(names: &[String], ncols: usize) -> Result<()> {
    if names.len() != ncols {
        return Err(Error::InvalidData(format!("{} covariate names for {} columns", names.len(), ncols)));
    }
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(Error::InvalidData(format!("duplicate covariate name `{name}`")));
        }
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = reader.headers()?.iter().map(String::from).collect();
    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, records))
}

/// Loads a comma-separated file with a header row.
///
/// Any row with an empty cell in a used column rejects the whole file, and the
/// error lists every offending row.
pub fn load_dataset(path: &Path, role: Role, schema: &Schema) -> Result<Dataset> {
    let (header, records) = read_table(path)?;
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let col = |name: &str| index.get(name).copied().ok_or_else(|| Error::MissingColumn(name.to_string()));

    let (t_col, y_col, w_col) = match role {
        Role::Sample => {
            let t = schema.treatment.as_deref().ok_or_else(|| {
                Error::InvalidParameter("sample schema needs a treatment column".into())
            })?;
            let y = schema.outcome.as_deref().ok_or_else(|| {
                Error::InvalidParameter("sample schema needs an outcome column".into())
            })?;
            (Some(col(t)?), Some(col(y)?), schema.weights.as_deref().map(col).transpose()?)
        }
        Role::Population => (None, None, None),
    };

    let names: Vec<String> = match &schema.covariates {
        Some(list) => list.clone(),
        None => {
            let reserved = schema.reserved();
            header.iter().filter(|h| !reserved.contains(h.as_str())).cloned().collect()
        }
    };
    let x_cols = names.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;

    let used: Vec<usize> = x_cols.iter().copied().chain(t_col).chain(y_col).chain(w_col).collect();
    let missing: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| used.iter().any(|&c| r.get(c).is_none_or(str::is_empty)))
        .map(|(i, _)| i + 1)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCells { rows: missing });
    }

    let cell = |row: usize, c: usize| -> Result<f64> {
        let raw = &records[row][c];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::NonNumeric { row: row + 1, column: header[c].clone(), value: raw.to_string() }),
        }
    };

    let n = records.len();
    let p = names.len();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for (j, &c) in x_cols.iter().enumerate() {
            x[(i, j)] = cell(i, c)?;
        }
    }

    match role {
        Role::Population => Ok(Dataset::Population(TargetPopulation::new(x, names)?)),
        Role::Sample => {
            let (t_col, y_col) = (t_col.unwrap(), y_col.unwrap());
            let mut treatment = Vec::with_capacity(n);
            for (i, rec) in records.iter().enumerate() {
                treatment.push(match &rec[t_col] {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(Error::TreatmentNotBinary {
                            column: header[t_col].clone(),
                            row: i + 1,
                            value: other.to_string(),
                        })
                    }
                });
            }
            let outcome = (0..n).map(|i| cell(i, y_col)).collect::<Result<Vec<_>>>()?;
            let external_weights = w_col.map(|c| (0..n).map(|i| cell(i, c)).collect::<Result<Vec<_>>>()).transpose()?;
            let mut s = ExperimentalSample::new(x, treatment, outcome, names)?;
            s.external_weights = external_weights;
            s.validate()?;
            Ok(Dataset::Sample(s))
        }
    }
}

pub fn load_sample(path: &Path, schema: &Schema) -> Result<ExperimentalSample> {
    match load_dataset(path, Role::Sample, schema)? {
        Dataset::Sample(s) => Ok(s),
        Dataset::Population(_) => unreachable!(),
    }
}

pub fn load_population(path: &Path, schema: &Schema) -> Result<TargetPopulation> {
    match load_dataset(path, Role::Population, schema)? {
        Dataset::Population(p) => Ok(p),
        Dataset::Sample(_) => unreachable!(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Writes a sample with columns `treatment`, `outcome`, then covariates.
///
/// Values use the shortest round-trip decimal form, so reloading is bitwise exact.
pub fn write_sample(path: &Path, s: &ExperimentalSample) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["treatment".to_string(), "outcome".to_string()];
    header.extend(s.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..s.n() {
        let mut row = vec![if s.treatment[i] { "1".into() } else { "0".into() }, s.outcome[i].to_string()];
        row.extend(s.covariates.row(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_population(path: &Path, p: &TargetPopulation) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&p.covariate_names)?;
    for row in p.covariates.row_iter() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush().map_err(io_err(path))
}

/// Column-aligned sample, population and settings ready for analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisInput {
    pub sample: ExperimentalSample,
    pub population: TargetPopulation,
    pub config: AnalysisConfig,
    /// Covariates with zero variance in the population (harmless but reported).
    pub flags: Vec<String>,
}

/// Reconciles population columns to the sample's order by name.
pub fn align(sample: ExperimentalSample, population: TargetPopulation, config: AnalysisConfig) -> Result<AnalysisInput> {
    config.validate()?;
    let s_names: HashSet<&String> = sample.covariate_names.iter().collect();
    let p_names: HashSet<&String> = population.covariate_names.iter().collect();
    let sample_only: Vec<String> =
        sample.covariate_names.iter().filter(|n| !p_names.contains(n)).cloned().collect();
    let population_only: Vec<String> =
        population.covariate_names.iter().filter(|n| !s_names.contains(n)).cloned().collect();
    if !sample_only.is_empty() || !population_only.is_empty() {
        return Err(Error::CovariateMismatch { sample_only, population_only });
    }

    let constant: Vec<String> = sample
        .covariate_names
        .iter()
        .enumerate()
        .filter(|(j, _)| is_constant(sample.covariates.column(*j).iter()))
        .map(|(_, n)| n.clone())
        .collect();
    if !constant.is_empty() {
        return Err(Error::ConstantCovariate(constant));
    }

    let pos: HashMap<&String, usize> =
        population.covariate_names.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let order: Vec<usize> = sample.covariate_names.iter().map(|n| pos[n]).collect();
    let covariates = population.covariates.select_columns(&order);
    let population = TargetPopulation { covariates, covariate_names: sample.covariate_names.clone() };

    let flags = population
        .covariate_names
        .iter()
        .enumerate()
        .filter(|(j, _)| is_constant(population.covariates.column(*j).iter()))
        .map(|(_, n)| format!("covariate `{n}` is constant in the population"))
        .collect();
    Ok(AnalysisInput { sample, population, config, flags })
}

fn is_constant<'a>(mut values: impl Iterator<Item = &'a f64>) -> bool {
    match values.next() {
        None => true,
        Some(first) => values.all(|v| v == first),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_four_row_sample() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "s.csv", "t,y,a,b\n1,2.5,1,0\n1,3,0,1\n0,1,1,1\n0,0,0,0\n");
        let s = load_sample(&path, &Schema::sample("t", "y")).unwrap();
        assert_eq!((s.n(), s.p()), (4, 2));
        assert_eq!(s.treatment, vec![true, true, false, false]);
        assert_eq!(s.covariate_names, vec!["a", "b"]);
    }

    #[test]
    fn blank_outcome_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "s.csv", "t,y,a\n1,2,1\n1,,0\n0,1,1\n0,0,0\n");
        match load_sample(&path, &Schema::sample("t", "y")) {
            Err(Error::MissingCells { rows }) => assert_eq!(rows, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let schema = Schema::sample("t", "y");
        assert!(matches!(load_sample(&dir.path().join("nope.csv"), &schema), Err(Error::FileNotFound(_))));
        let p = write(&dir, "a.csv", "t,y,a\n1,2,x\n1,2,1\n0,1,1\n0,0,0\n");
        assert!(matches!(load_sample(&p, &schema), Err(Error::NonNumeric { row: 1, .. })));
        let p = write(&dir, "b.csv", "t,y,a\n2,2,1\n1,2,1\n0,1,1\n0,0,0\n");
        assert!(matches!(load_sample(&p, &schema), Err(Error::TreatmentNotBinary { row: 1, .. })));
        let p = write(&dir, "c.csv", "t,out,a\n1,2,1\n");
        assert!(matches!(load_sample(&p, &schema), Err(Error::MissingColumn(c)) if c == "y"));
    }

    fn toy() -> (ExperimentalSample, TargetPopulation) {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 10.0, 4.0, 30.0]);
        let s = ExperimentalSample::new(
            x,
            vec![true, true, false, false],
            vec![1.0, 3.0, 2.0, 2.0],
            vec!["age".into(), "inc".into()],
        )
        .unwrap();
        let px = DMatrix::from_row_slice(3, 2, &[11.0, 1.0, 21.0, 2.0, 31.0, 2.0]);
        let p = TargetPopulation::new(px, vec!["inc".into(), "age".into()]).unwrap();
        (s, p)
    }

    #[test]
    fn align_permutes_population_columns() {
        let (s, p) = toy();
        let before = p.column_means();
        let input = align(s, p, AnalysisConfig::default()).unwrap();
        let after = input.population.column_means();
        assert_eq!(input.population.covariate_names, vec!["age", "inc"]);
        assert_eq!(after, vec![before[1], before[0]]);
        let again = align(input.sample.clone(), input.population.clone(), input.config.clone()).unwrap();
        assert_eq!(again, input);
    }

    #[test]
    fn align_reports_missing_covariate() {
        let (s, _) = toy();
        let p = TargetPopulation::new(DMatrix::from_row_slice(2, 1, &[1.0, 2.0]), vec!["inc".into()]).unwrap();
        match align(s, p, AnalysisConfig::default()) {
            Err(Error::CovariateMismatch { sample_only, .. }) => assert_eq!(sample_only, vec!["age"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn align_rejects_constant_sample_column() {
        let (mut s, p) = toy();
        s.covariates.column_mut(1).fill(5.0);
        assert!(matches!(align(s, p, AnalysisConfig::default()), Err(Error::ConstantCovariate(c)) if c == ["inc"]));
    }

    #[test]
    fn write_then_load_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let (mut s, p) = toy();
        s.outcome[0] = 0.1 + 0.2;
        s.covariates[(1, 1)] = std::f64::consts::PI * 1e-7;
        let sp = dir.path().join("s.csv");
        write_sample(&sp, &s).unwrap();
        assert_eq!(load_sample(&sp, &Schema::sample("treatment", "outcome")).unwrap(), s);
        let pp = dir.path().join("p.csv");
        write_population(&pp, &p).unwrap();
        assert_eq!(load_population(&pp, &Schema::default()).unwrap(), p);
    }
}
