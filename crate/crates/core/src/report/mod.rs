//! Vector-graphics plots and the assembled report.

mod contour;
mod extreme;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use contour::{render_contour, CellLayer, ContourStyle};
pub use extreme::{extreme_curves, render_extreme_plot, ExtremeCurve, DEFAULT_C_STAR, PRINTED_C_STAR};

use crate::benchmark::BenchmarkTable;
use crate::data::AnalysisConfig;
use crate::error::{Error, Result};
use crate::estimators::{BootstrapResult, PateEstimate};
use crate::sensitivity::{ExtremeScenario, KillerCriterion, SensitivitySummary, VarianceBounds, XiStats};
use crate::sim::OracleReport;
use crate::weights::BalanceReport;

pub const SCHEMA: &str = "weightsens.report/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn digest_file(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(InputDigest { role: role.to_string(), path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateEntry {
    pub label: String,
    pub estimate: PateEstimate,
    /// Robustness value of this estimate, when a sensitivity summary was computed for it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub method: crate::data::WeightMethod,
    pub converged: bool,
    pub iterations: usize,
    pub mean: f64,
    pub variance: f64,
    pub balance: BalanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRef {
    pub file: String,
    pub r2_points: usize,
    pub rho_points: usize,
    pub criterion: KillerCriterion,
    pub killer_share: f64,
    /// Boundary point closest to ρ² = R² on the estimate's side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal_boundary: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema: String,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<AnalysisConfig>,
    /// Command-line options not covered by `config`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<EstimateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivitySummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_bounds: Option<VarianceBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<XiStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extreme: Option<ExtremeScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Default for ReportBundle {
    fn default() -> Self {
        Self {
            schema: SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: vec![],
            config: None,
            options: BTreeMap::new(),
            estimates: vec![],
            weights: None,
            bootstrap: None,
            sensitivity: None,
            variance_bounds: None,
            xi: None,
            benchmark: None,
            contour: None,
            extreme: None,
            oracle: None,
            flags: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(Self::Json),
            "text" => Ok(Self::Text),
            _ => Err("expected json|text".into()),
        }
    }
}

pub fn emit_report(bundle: &ReportBundle, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(bundle)?;
            s.push('\n');
            Ok(s)
        }
        Format::Text => Ok(text_report(bundle)),
    }
}

pub fn parse_report(text: &str) -> Result<ReportBundle> {
    let b: ReportBundle = serde_json::from_str(text)?;
    if b.schema != SCHEMA {
        return Err(Error::InvalidData(format!("unsupported report schema {:?}", b.schema)));
    }
    Ok(b)
}

/// Four significant digits with a fixed decimal point.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit (9.9996 -> 10.000); redo at that magnitude.
    let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
    if digits > 4 && decimals > 0 {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}

fn opt4(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), sig4)
}

/// Left-aligned first column, right-aligned numbers.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| -> String {
        let mut s = String::new();
        for (k, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if k == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect()));
    for r in rows {
        out.push_str(&line(r.clone()));
    }
    out
}

fn text_report(b: &ReportBundle) -> String {
    let mut out = format!("weightsens {} ({})\n", b.tool_version, b.schema);
    for d in &b.inputs {
        let _ = writeln!(out, "input {}: {} sha256={}", d.role, d.path, d.sha256);
    }
    if let Some(w) = &b.weights {
        let _ = writeln!(out, "\nCovariate balance ({:?} weights, var(w) = {})", w.method, sig4(w.variance));
        let rows: Vec<Vec<String>> = w
            .balance
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.covariate.clone(),
                    sig4(r.sample_mean),
                    sig4(r.weighted_mean),
                    sig4(r.population_mean),
                    sig4(r.std_diff_unweighted),
                    sig4(r.std_diff_weighted),
                ]
            })
            .collect();
        out.push_str(&table(&["covariate", "sample", "weighted", "population", "std.diff", "std.diff.w"], &rows));
    }
    if !b.estimates.is_empty() {
        out.push_str("\nPoint estimates\n");
        let rows: Vec<Vec<String>> =
            b.estimates.iter().map(|e| vec![e.label.clone(), sig4(e.estimate.value), opt4(e.rv)]).collect();
        out.push_str(&table(&["estimator", "estimate", "RV"], &rows));
    }
    if let Some(bs) = &b.bootstrap {
        let _ = writeln!(
            out,
            "\nBootstrap: {} replicates (seed {}), 95% interval [{}, {}], {} failed",
            bs.replicates,
            bs.seed,
            sig4(bs.lower),
            sig4(bs.upper),
            bs.failed
        );
    }
    if let Some(s) = &b.sensitivity {
        out.push_str("\nSensitivity summary\n");
        let rows = vec![
            vec!["estimate".into(), sig4(s.estimate)],
            vec!["q".into(), sig4(s.q)],
            vec!["RV".into(), sig4(s.rv)],
            vec!["cor(w, tau)".into(), sig4(s.cor_w_tau_hat)],
            vec!["rho bound".into(), sig4(s.rho_bound)],
            vec!["sigma2 max".into(), sig4(s.sigma2_max)],
            vec!["var(w)".into(), sig4(s.var_w)],
        ];
        out.push_str(&table(&["quantity", "value"], &rows));
    }
    if let Some(v) = &b.variance_bounds {
        let _ = writeln!(out, "\nvar(tau) bounds ({:?}): [{}, {}]", v.assumption, sig4(v.lower), sig4(v.upper));
    }
    if let Some(x) = &b.xi {
        let _ = writeln!(out, "sigma2_xi bound: {}{}", sig4(x.sigma2_xi_max), if x.clamped { " (clamped at 0)" } else { "" });
    }
    if let Some(t) = &b.benchmark {
        let _ = writeln!(out, "\nFormal benchmarking (k_sigma = {}, k_rho = {}, {:?})", sig4(t.k_sigma), sig4(t.k_rho), t.mode);
        let rows: Vec<Vec<String>> = t
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    sig4(r.r2_bench),
                    sig4(r.rho_bench),
                    sig4(r.est_bias),
                    opt4(r.mrcs),
                    opt4(r.k_sigma_min),
                    opt4(r.k_rho_min),
                ]
            })
            .collect();
        out.push_str(&table(&["covariate", "R2", "rho", "est.bias", "MRCS", "k_sigma.min", "k_rho.min"], &rows));
        for e in &t.errors {
            let _ = writeln!(out, "failed {}: {}", e.label, e.message);
        }
    }
    if let Some(c) = &b.contour {
        let _ = writeln!(
            out,
            "\nContour: {} ({}x{}), killer share {}",
            c.file,
            c.r2_points,
            c.rho_points,
            sig4(c.killer_share)
        );
        if let Some((r2, rho)) = c.diagonal_boundary {
            let _ = writeln!(out, "boundary nearest rho^2 = R2: ({}, {})", sig4(r2), sig4(rho));
        }
    }
    if let Some(e) = &b.extreme {
        let _ = writeln!(
            out,
            "\nExtreme scenario: rho_max {}, R2_max {}, |bias| {}",
            sig4(e.rho_max),
            sig4(e.r2_max),
            opt4(e.bias_max)
        );
    }
    if let Some(o) = &b.oracle {
        let _ = writeln!(out, "\nOracle checks ({} replications, {} failed)", o.replications, o.failed);
        let rows: Vec<Vec<String>> = o
            .checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    sig4(c.analytic),
                    sig4(c.empirical),
                    sig4(c.tolerance),
                    if c.pass { "PASS".into() } else { "FAIL".into() },
                ]
            })
            .collect();
        out.push_str(&table(&["check", "analytic", "empirical", "tolerance", "result"], &rows));
    }
    let mut flags: Vec<&String> = b.flags.iter().collect();
    if let Some(s) = &b.sensitivity {
        flags.extend(&s.flags);
    }
    if let Some(v) = &b.variance_bounds {
        flags.extend(&v.flags);
    }
    for e in &b.estimates {
        flags.extend(&e.estimate.flags);
    }
    if let Some(t) = &b.benchmark {
        for r in &t.rows {
            flags.extend(&r.flags);
        }
    }
    if !flags.is_empty() {
        out.push_str("\nFlags\n");
        for f in flags {
            let _ = writeln!(out, "- {f}");
        }
    }
    out
}
