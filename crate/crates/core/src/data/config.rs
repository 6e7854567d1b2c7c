//! `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are case-sensitive.
//! Unknown keys are rejected so typos surface instead of silently falling back
//! to defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config { line: line_no, msg: "empty key".into() });
            }
            if entries.insert(key.to_string(), (line_no, value.trim().to_string())).is_some() {
                return Err(Error::Config { line: line_no, msg: format!("duplicate key `{key}`") });
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                Error::FileNotFound(path.to_path_buf())
            } else {
                Error::Io { path: path.to_path_buf(), source }
            }
        })?;
        Self::parse(&text)
    }

    /// Removes and parses `key`, leaving `None` when absent.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|e| Error::Config {
                line,
                msg: format!("bad value `{value}` for `{key}`: {e}"),
            }),
        }
    }

    /// Removes a comma-separated list of numbers.
    pub fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|e| Error::Config {
                        line,
                        msg: format!("bad list entry `{s}` for `{key}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Errors if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::Config { line, msg: format!("unknown key `{key}`") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMethod {
    Entropy,
    IpwLogistic,
    Uniform,
    External,
}

impl FromStr for WeightMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "ipw_logistic" | "ipw-logistic" | "ipw" => Ok(Self::IpwLogistic),
            "uniform" => Ok(Self::Uniform),
            "external" => Ok(Self::External),
            _ => Err("expected entropy|ipw_logistic|uniform|external".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorStyle {
    Ht,
    Hajek,
}

impl FromStr for EstimatorStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ht" => Ok(Self::Ht),
            "hajek" => Ok(Self::Hajek),
            _ => Err("expected ht|hajek".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Assumption {
    None,
    CovY0TauNonneg,
    PoCorrNonneg,
    PoCorrNegative,
}

impl FromStr for Sigma2Assumption {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "none" => Ok(Self::None),
            "cov_y0_tau_nonneg" => Ok(Self::CovY0TauNonneg),
            "po_corr_nonneg" => Ok(Self::PoCorrNonneg),
            "po_corr_negative" => Ok(Self::PoCorrNegative),
            _ => Err("expected none|cov-y0-tau-nonneg|po-corr-nonneg|po-corr-negative".into()),
        }
    }
}

/// Analysis settings shared by the CLI and the library entry points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub weight_method: WeightMethod,
    pub estimator: EstimatorStyle,
    pub q: f64,
    pub sigma2_assumption: Sigma2Assumption,
    pub grid_r2: usize,
    pub grid_rho: usize,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            weight_method: WeightMethod::Entropy,
            estimator: EstimatorStyle::Ht,
            q: 1.0,
            sigma2_assumption: Sigma2Assumption::None,
            grid_r2: 400,
            grid_rho: 400,
            seed: 20240101,
        }
    }
}

impl AnalysisConfig {
    /// Reads the documented analysis keys; other keys are left in `kv`.
    pub fn take_from(kv: &mut KeyValues) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            weight_method: kv.take("weight_method")?.unwrap_or(d.weight_method),
            estimator: kv.take("estimator")?.unwrap_or(d.estimator),
            q: kv.take("q")?.unwrap_or(d.q),
            sigma2_assumption: kv.take("sigma2_assumption")?.unwrap_or(d.sigma2_assumption),
            grid_r2: kv.take("grid_r2")?.unwrap_or(d.grid_r2),
            grid_rho: kv.take("grid_rho")?.unwrap_or(d.grid_rho),
            seed: kv.take("seed")?.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut kv = KeyValues::read(path)?;
        let cfg = Self::take_from(&mut kv)?;
        kv.finish()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if self.grid_r2 < 2 || self.grid_rho < 2 {
            return Err(Error::InvalidParameter("grid resolution must be at least 2 per axis".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let text = "# analysis\nweight_method = ipw_logistic\nestimator=hajek\nq = 0.5\n\
                    sigma2_assumption = po-corr-nonneg\ngrid_r2 = 50\ngrid_rho = 60 # trailing\nseed = 7\n";
        let cfg = AnalysisConfig::take_from(&mut KeyValues::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.weight_method, WeightMethod::IpwLogistic);
        assert_eq!(cfg.estimator, EstimatorStyle::Hajek);
        assert_eq!(cfg.q, 0.5);
        assert_eq!(cfg.sigma2_assumption, Sigma2Assumption::PoCorrNonneg);
        assert_eq!((cfg.grid_r2, cfg.grid_rho, cfg.seed), (50, 60, 7));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut kv = KeyValues::parse("q = 1\nbogus = 2").unwrap();
        AnalysisConfig::take_from(&mut kv).unwrap();
        assert!(matches!(kv.finish(), Err(Error::Config { line: 2, .. })));
        assert!(KeyValues::parse("no equals sign").is_err());
        assert!(KeyValues::parse("a=1\na=2").is_err());
        let mut kv = KeyValues::parse("q = 0").unwrap();
        assert!(AnalysisConfig::take_from(&mut kv).is_err());
    }
}
