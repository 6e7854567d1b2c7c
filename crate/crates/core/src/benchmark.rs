//! Leave-covariates-out benchmarking of the sensitivity parameters.
//!
//! Dropping observed covariates from the weight fit produces an error
//! `ε⁻ʲ = w⁻ʲ − w` whose size and correlation with the effect calibrate how
//! strong an omitted confounder would be relative to what was observed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AnalysisInput, WeightMethod};
use crate::error::{Error, Result};
use crate::estimators::{fit_linear_tau_model_on, LinearTauModel, TauModel};
use crate::sensitivity::{arm_split_cov, bias, Mode, SensitivitySummary};
use crate::stats;
use crate::weights::{fit_weights, WeightSet};

/// A covariate or group of covariates removed together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subset {
    pub label: String,
    pub columns: Vec<usize>,
}

/// Parses `a,b;c` into the groups `{a, b}` and `{c}`.
pub fn parse_subsets(text: &str, names: &[String]) -> Result<Vec<Subset>> {
    let mut out = Vec::new();
    for group in text.split(';').map(str::trim).filter(|g| !g.is_empty()) {
        let mut columns = Vec::new();
        let mut labels = Vec::new();
        for name in group.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let j = names.iter().position(|c| c == name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            if !columns.contains(&j) {
                columns.push(j);
                labels.push(name);
            }
        }
        out.push(Subset { label: labels.join("+"), columns });
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("no subsets given".into()));
    }
    Ok(out)
}

/// One subset per covariate, in column order.
pub fn single_subsets(names: &[String]) -> Vec<Subset> {
    names.iter().enumerate().map(|(j, n)| Subset { label: n.clone(), columns: vec![j] }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooError {
    pub eps: Vec<f64>,
    pub r2_loo: f64,
    pub rho_loo: f64,
}

/// Refits the weights without `subset` and compares them to `weights`.
///
/// In weighted mode `rho_loo` is the arm-split covariance of `ε⁻ʲ` with the
/// outcome scaled by `sqrt(σ² var(ε⁻ʲ))`. In augmented mode it is the correlation
/// of `ε⁻ʲ` with `τ̂(X) − τ̂(X⁻ʲ)`, where `τ̂(X⁻ʲ)` refits `model` without the subset.
pub fn loo_error(
    input: &AnalysisInput,
    subset: &[usize],
    weights: &WeightSet,
    mode: Mode,
    sigma2: f64,
    model: Option<&LinearTauModel>,
) -> Result<LooError> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("benchmark subset is empty".into()));
    }
    let p = input.sample.p();
    if let Some(&j) = subset.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidParameter(format!("column {j} out of range")));
    }
    let var_w = weights.var();
    if !(var_w > 0.0) {
        return Err(Error::InvalidWeights("benchmarking needs weights with positive variance".into()));
    }
    let used: Vec<usize> = if weights.columns.is_empty() { (0..p).collect() } else { weights.columns.clone() };
    let keep: Vec<usize> = used.iter().copied().filter(|j| !subset.contains(j)).collect();
    let eps = if keep.len() == used.len() {
        vec![0.0; weights.len()]
    } else {
        if keep.is_empty() {
            return Err(Error::InvalidParameter("benchmark subset covers every weighted covariate".into()));
        }
        let warm = (weights.method == WeightMethod::Entropy && weights.dual_or_coef.len() == used.len()).then(|| {
            used.iter().zip(&weights.dual_or_coef).filter(|(j, _)| keep.contains(j)).map(|(_, l)| *l).collect()
        });
        let refit = fit_weights(input, weights.method, &keep, warm)?;
        refit.values.iter().zip(&weights.values).map(|(a, b)| a - b).collect()
    };
    let var_eps = stats::var(&eps);
    let s = &input.sample;
    let rho_loo = match mode {
        Mode::Weighted => {
            if var_eps > 0.0 {
                arm_split_cov(&s.treatment, &s.outcome, &eps) / (sigma2 * var_eps).sqrt()
            } else {
                0.0
            }
        }
        Mode::Augmented => {
            let model = model.ok_or_else(|| Error::InvalidParameter("augmented benchmarking needs a tau model".into()))?;
            let cols: Vec<usize> = model.columns.iter().copied().filter(|j| !subset.contains(j)).collect();
            let full = model.predict_all(&s.covariates)?;
            let xi = if cols.len() == model.columns.len() {
                vec![0.0; full.len()]
            } else {
                let reduced = fit_linear_tau_model_on(s, &cols)?.predict_all(&s.covariates)?;
                full.iter().zip(&reduced).map(|(a, b)| a - b).collect()
            };
            stats::cor(&eps, &xi)
        }
    };
    Ok(LooError { r2_loo: var_eps / var_w, rho_loo, eps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transformed {
    pub r2_bench: f64,
    pub rho_bench: f64,
    pub clamped: bool,
}

/// Scales the leave-out parameters by relative strengths `k_sigma`, `k_rho`.
///
/// `rho_bench` is clamped to `±rho_bound`.
pub fn benchmark_transform(r2_loo: f64, rho_loo: f64, k_sigma: f64, k_rho: f64, rho_bound: f64) -> Transformed {
    let kr = k_sigma * r2_loo;
    let raw = k_rho * rho_loo;
    let rho_bench = raw.clamp(-rho_bound, rho_bound);
    Transformed { r2_bench: kr / (1.0 + kr), rho_bench, clamped: rho_bench != raw }
}

/// Minimum relative confounding strength; `None` when the benchmarked bias is 0.
pub fn mrcs(estimate: f64, bias_at_k1: f64) -> Option<f64> {
    (bias_at_k1 != 0.0).then(|| estimate / bias_at_k1)
}

/// `(RV / R², sqrt(RV) / ρ)` at the k = 1 benchmark; `None` for zero denominators.
pub fn k_min(rv: f64, r2_bench_at_k1: f64, rho_bench_at_k1: f64) -> (Option<f64>, Option<f64>) {
    ((r2_bench_at_k1 != 0.0).then(|| rv / r2_bench_at_k1), (rho_bench_at_k1 != 0.0).then(|| rv.sqrt() / rho_bench_at_k1))
}

/// The `k_sigma` at which the transformed R² equals `rv` exactly.
pub fn k_sigma_exact(rv: f64, r2_loo: f64) -> Option<f64> {
    (r2_loo != 0.0 && rv < 1.0).then(|| rv / (r2_loo * (1.0 - rv)))
}

/// The scalar inputs a benchmark row needs from the sensitivity summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchContext {
    pub estimate: f64,
    pub sigma2: f64,
    pub var_w: f64,
    pub rv: f64,
    pub rho_bound: f64,
}

impl From<&SensitivitySummary> for BenchContext {
    fn from(s: &SensitivitySummary) -> Self {
        Self { estimate: s.estimate, sigma2: s.sigma2_max, var_w: s.var_w, rv: s.rv, rho_bound: s.rho_bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub label: String,
    pub r2_loo: f64,
    pub rho_loo: f64,
    pub r2_bench: f64,
    pub rho_bench: f64,
    pub est_bias: f64,
    pub mrcs: Option<f64>,
    pub k_sigma_min: Option<f64>,
    pub k_rho_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Builds a row from leave-out parameters.
pub fn assess(ctx: &BenchContext, label: &str, r2_loo: f64, rho_loo: f64, k_sigma: f64, k_rho: f64, exact_inversion: bool) -> BenchmarkRow {
    let at_k = benchmark_transform(r2_loo, rho_loo, k_sigma, k_rho, ctx.rho_bound);
    let at_1 = benchmark_transform(r2_loo, rho_loo, 1.0, 1.0, ctx.rho_bound);
    let mut flags = Vec::new();
    if at_k.clamped || at_1.clamped {
        flags.push(format!("benchmarked rho clamped to +/-{:.6}", ctx.rho_bound));
    }
    let bias_k1 = bias(at_1.r2_bench, at_1.rho_bench, ctx.sigma2, ctx.var_w);
    let m = mrcs(ctx.estimate, bias_k1);
    if m.is_none() {
        flags.push("benchmarked bias is 0: MRCS unbounded".into());
    }
    let (ks, kr) = k_min(ctx.rv, at_1.r2_bench, at_1.rho_bench);
    let ks = if exact_inversion { k_sigma_exact(ctx.rv, r2_loo) } else { ks };
    if ks.is_none() || kr.is_none() {
        flags.push("zero benchmark parameter: k minimum unbounded".into());
    }
    BenchmarkRow {
        label: label.to_string(),
        r2_loo,
        rho_loo,
        r2_bench: at_k.r2_bench,
        rho_bench: at_k.rho_bench,
        est_bias: bias(at_k.r2_bench, at_k.rho_bench, ctx.sigma2, ctx.var_w),
        mrcs: m,
        k_sigma_min: ks,
        k_rho_min: kr,
        flags,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub label: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub k_sigma: f64,
    pub k_rho: f64,
    pub mode: Mode,
    pub exact_inversion: bool,
    /// Subsets whose refit failed; the remaining rows are still reported.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<RowError>,
}

impl BenchmarkTable {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |x| format!("{x:.4}"));
        let mut out = String::from("label,r2_loo,rho_loo,r2_bench,rho_bench,est_bias,mrcs,k_sigma_min,k_rho_min\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{}\n",
                r.label,
                r.r2_loo,
                r.rho_loo,
                r.r2_bench,
                r.rho_bench,
                r.est_bias,
                opt(r.mrcs),
                opt(r.k_sigma_min),
                opt(r.k_rho_min)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkOptions {
    pub k_sigma: f64,
    pub k_rho: f64,
    pub exact_inversion: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self { k_sigma: 1.0, k_rho: 1.0, exact_inversion: false }
    }
}

/// One row per subset, refits run in parallel and reported in input order.
pub fn benchmark_table(
    input: &AnalysisInput,
    weights: &WeightSet,
    summary: &SensitivitySummary,
    subsets: &[Subset],
    opts: BenchmarkOptions,
    model: Option<&LinearTauModel>,
) -> Result<BenchmarkTable> {
    if !(opts.k_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("k_sigma must be nonnegative, got {}", opts.k_sigma)));
    }
    if summary.mode == Mode::Augmented && model.is_none() {
        return Err(Error::InvalidParameter("augmented benchmarking needs a tau model".into()));
    }
    let ctx = BenchContext::from(summary);
    let results: Vec<Result<BenchmarkRow>> = subsets
        .par_iter()
        .map(|s| {
            let loo = loo_error(input, &s.columns, weights, summary.mode, summary.sigma2_max, model)?;
            Ok(assess(&ctx, &s.label, loo.r2_loo, loo.rho_loo, opts.k_sigma, opts.k_rho, opts.exact_inversion))
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (s, r) in subsets.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(RowError { label: s.label.clone(), message: e.to_string() }),
        }
    }
    Ok(BenchmarkTable {
        rows,
        k_sigma: opts.k_sigma,
        k_rho: opts.k_rho,
        mode: summary.mode,
        exact_inversion: opts.exact_inversion,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{align, AnalysisConfig, ExperimentalSample, TargetPopulation};
    use crate::sensitivity::{cor_w_tau_hat, summarize};
    use crate::weights::fit_default;
    use nalgebra::DMatrix;

    #[test]
    fn transform_examples() {
        assert_eq!(benchmark_transform(1.0, 0.0, 1.0, 1.0, 1.0).r2_bench, 0.5);
        assert!((benchmark_transform(0.0, 0.3, 1.0, 2.0, 1.0).rho_bench - 0.6).abs() < 1e-15);
        assert!((benchmark_transform(0.25, 0.0, 2.0, 1.0, 1.0).r2_bench - 1.0 / 3.0).abs() < 1e-15);
        let t = benchmark_transform(0.1, 0.7, 1.0, 2.0, 0.9);
        assert!(t.clamped && t.rho_bench == 0.9);
    }

    #[test]
    fn transform_matches_orthogonal_construction() {
        // var(w) = 1 and an orthogonal ε with k·r times its variance.
        let (k, r): (f64, f64) = (2.0, 0.25);
        let w = [2.0, 2.0, 0.0, 0.0];
        let s = (k * r).sqrt();
        let eps = [s, -s, s, -s];
        assert_eq!(stats::cov(&w, &eps), 0.0);
        let r2 = stats::var(&eps) / (stats::var(&w) + stats::var(&eps));
        assert!((r2 - benchmark_transform(r, 0.0, k, 1.0, 1.0).r2_bench).abs() < 1e-15);
    }

    #[test]
    fn mrcs_examples() {
        assert!((mrcs(1.36, 0.48).unwrap() - 2.8333333333333335).abs() < 1e-12);
        assert!((mrcs(1.36, -0.63).unwrap() - -2.1587301587301586).abs() < 1e-12);
        assert_eq!(mrcs(0.5, 0.5), Some(1.0));
        assert_eq!(mrcs(1.0, 0.0), None);
    }

    #[test]
    fn k_min_examples() {
        assert!((k_min(0.41, 0.20, 1.0).0.unwrap() - 2.05).abs() < 1e-12);
        assert!((k_min(0.41, 1.0, 0.59).1.unwrap() - 1.0852).abs() < 1e-4);
        assert!((k_min(0.41, 1.0, -0.49).1.unwrap() - -1.3068).abs() < 1e-4);
        assert_eq!(k_min(0.41, 0.0, 0.0), (None, None));
    }

    #[test]
    fn exact_inversion_hits_rv() {
        let k = k_sigma_exact(0.3, 0.05).unwrap();
        assert!((benchmark_transform(0.05, 0.0, k, 1.0, 1.0).r2_bench - 0.3).abs() < 1e-12);
    }

    #[test]
    fn parse_groups() {
        let names: Vec<String> = ["age", "black", "married"].iter().map(|s| s.to_string()).collect();
        let s = parse_subsets("age, black; married", &names).unwrap();
        assert_eq!(s, vec![Subset { label: "age+black".into(), columns: vec![0, 1] }, Subset { label: "married".into(), columns: vec![2] }]);
        assert!(parse_subsets("nope", &names).is_err());
        assert!(parse_subsets(" ; ", &names).is_err());
    }

    fn synthetic() -> AnalysisInput {
        let n = 60;
        let x = DMatrix::from_fn(n, 3, |i, j| ((i * (j + 3) * 7919) % 97) as f64 / 97.0 + if j == 2 { (i % 2) as f64 } else { 0.0 });
        let t: Vec<bool> = (0..n).map(|i| (i * 5) % 3 == 0).collect();
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] * 2.0 + if t[i] { 1.0 + x[(i, 1)] } else { 0.0 }).collect();
        let s = ExperimentalSample::new(x, t, y, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let p = TargetPopulation::new(DMatrix::from_fn(40, 3, |i, j| ((i * (j + 2) * 31) % 53) as f64 / 45.0), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        align(s, p, AnalysisConfig::default()).unwrap()
    }

    fn summary(input: &AnalysisInput, w: &WeightSet, mode: Mode) -> SensitivitySummary {
        let s = &input.sample;
        let est = crate::estimators::weighted_pate(s, w, crate::data::EstimatorStyle::Ht).unwrap().value;
        let cor = cor_w_tau_hat(&s.treatment, &s.outcome, &w.values, 4.0).unwrap();
        summarize(est, 1.0, 4.0, w.var(), &cor, mode).unwrap()
    }

    #[test]
    fn smoke_three_covariates() {
        let input = synthetic();
        let w = fit_default(&input).unwrap();
        let sm = summary(&input, &w, Mode::Weighted);
        let subsets = single_subsets(&input.sample.covariate_names);
        let t = benchmark_table(&input, &w, &sm, &subsets, BenchmarkOptions::default(), None).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.errors.is_empty());
        for r in &t.rows {
            assert!(r.r2_loo.is_finite() && r.rho_loo.is_finite() && r.est_bias.is_finite());
            assert!((0.0..1.0).contains(&r.r2_bench));
        }
        assert_eq!(t.rows.iter().map(|r| r.label.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn unused_column_gives_zero_error() {
        let input = synthetic();
        let w = fit_weights(&input, WeightMethod::Entropy, &[0, 1], None).unwrap();
        let loo = loo_error(&input, &[2], &w, Mode::Weighted, 4.0, None).unwrap();
        assert!(loo.eps.iter().all(|&e| e == 0.0));
        assert_eq!((loo.r2_loo, loo.rho_loo), (0.0, 0.0));
    }

    #[test]
    fn grouped_subset_matches_joint_refit() {
        let input = synthetic();
        let w = fit_default(&input).unwrap();
        let loo = loo_error(&input, &[0, 2], &w, Mode::Weighted, 4.0, None).unwrap();
        let direct = fit_weights(&input, WeightMethod::Entropy, &[1], None).unwrap();
        let eps: Vec<f64> = direct.values.iter().zip(&w.values).map(|(a, b)| a - b).collect();
        let r2 = stats::var(&eps) / w.var();
        assert!((loo.r2_loo - r2).abs() < 1e-9, "{} {}", loo.r2_loo, r2);
        assert!(loo_error(&input, &[0, 1, 2], &w, Mode::Weighted, 4.0, None).is_err());
    }

    #[test]
    fn augmented_mode_rows() {
        let input = synthetic();
        let w = fit_default(&input).unwrap();
        let model = crate::estimators::fit_linear_tau_model(&input.sample).unwrap();
        let sm = summary(&input, &w, Mode::Augmented);
        let t = benchmark_table(&input, &w, &sm, &single_subsets(&input.sample.covariate_names), BenchmarkOptions::default(), Some(&model)).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.rho_loo.abs() <= 1.0));
    }
}
