//! End-to-end analysis shared by the command line and the examples.

use serde::{Deserialize, Serialize};

use crate::benchmark::{benchmark_table, single_subsets, BenchmarkOptions, BenchmarkTable, Subset};
use crate::data::AnalysisInput;
use crate::error::Result;
use crate::estimators::{
    augmented_pate, bootstrap_interval, fit_linear_tau_model, sate_dim, weighted_pate, BootstrapResult, EstimatorSpec,
    LinearTauModel, PateEstimate, TauModel,
};
use crate::report::{ContourRef, EstimateEntry, ReportBundle, WeightSummary};
use crate::sensitivity::{
    cor_w_tau_hat, cor_w_xi_hat, extreme_scenario, killer_region, sigma_tau_bounds, sigma_xi_bound, summarize,
    BenchmarkPoint, ContourGrid, ExtremeScenario, GridSpec, KillerCriterion, Mode, SensitivitySummary, VarianceBounds,
    XiStats,
};
use crate::weights::{balance_table, fit_default, WeightSet};

/// Sensitivity inputs derived from the data for one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRun {
    pub estimate: PateEstimate,
    pub bounds: VarianceBounds,
    pub xi: Option<XiStats>,
    pub summary: SensitivitySummary,
    pub model: Option<LinearTauModel>,
}

/// Estimate, var(τ) bound and the summary statistics for `mode`.
///
/// Weighted mode uses the configured weighted estimator and the upper var(τ)
/// bound; augmented mode uses the T-learner augmentation and the σ²_ξ bound.
pub fn sensitivity_run(input: &AnalysisInput, w: &WeightSet, mode: Mode) -> Result<SensitivityRun> {
    let s = &input.sample;
    let (y1, y0) = s.arm_outcomes();
    let bounds = sigma_tau_bounds(&y1, &y0, input.config.sigma2_assumption)?;
    match mode {
        Mode::Weighted => {
            let estimate = weighted_pate(s, w, input.config.estimator)?;
            let cor = cor_w_tau_hat(&s.treatment, &s.outcome, &w.values, bounds.upper)?;
            let summary = summarize(estimate.value, input.config.q, bounds.upper, w.var(), &cor, mode)?;
            Ok(SensitivityRun { estimate, bounds, xi: None, summary, model: None })
        }
        Mode::Augmented => {
            let model = fit_linear_tau_model(s)?;
            let estimate = augmented_pate(s, &input.population, w, &model)?;
            let xi = sigma_xi_bound(bounds.upper, &model, s)?;
            let tau_hat = model.predict_all(&s.covariates)?;
            let cor = cor_w_xi_hat(&s.treatment, &s.outcome, &w.values, &tau_hat, xi.sigma2_xi_max)?;
            let mut summary = summarize(estimate.value, input.config.q, xi.sigma2_xi_max, w.var(), &cor, mode)?;
            if xi.clamped {
                summary.flags.push("sigma2_xi bound was negative and clamped to 0".into());
            }
            Ok(SensitivityRun { estimate, bounds, xi: Some(xi), summary, model: Some(model) })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub mode: Mode,
    pub criterion: KillerCriterion,
    /// `None` benchmarks every covariate on its own.
    pub subsets: Option<Vec<Subset>>,
    pub benchmark: BenchmarkOptions,
    pub bootstrap: Option<usize>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Weighted,
            criterion: KillerCriterion::Nullify,
            subsets: None,
            benchmark: BenchmarkOptions::default(),
            bootstrap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub weights: WeightSet,
    pub sate: PateEstimate,
    pub run: SensitivityRun,
    pub extreme: ExtremeScenario,
    pub benchmark: Option<BenchmarkTable>,
    pub grid: ContourGrid,
    pub bootstrap: Option<BootstrapResult>,
    pub flags: Vec<String>,
}

pub fn analyze(input: &AnalysisInput, opts: &AnalyzeOptions) -> Result<Analysis> {
    let weights = fit_default(input)?;
    let sate = sate_dim(&input.sample)?;
    let run = sensitivity_run(input, &weights, opts.mode)?;
    let sm = &run.summary;
    let extreme = extreme_scenario(sm.cor_w_tau_hat, None, sm.sigma2_max, sm.var_w)?;
    let mut flags = input.flags.clone();

    let subsets = opts.subsets.clone().unwrap_or_else(|| single_subsets(&input.sample.covariate_names));
    let benchmark = if input.sample.p() < 2 && opts.subsets.is_none() {
        flags.push("benchmarking skipped: a single covariate cannot be left out".into());
        None
    } else {
        Some(benchmark_table(input, &weights, sm, &subsets, opts.benchmark, run.model.as_ref())?)
    };
    let points = benchmark
        .iter()
        .flat_map(|t| &t.rows)
        .map(|r| BenchmarkPoint { r2: r.r2_bench, rho: r.rho_bench, label: r.label.clone() })
        .collect();
    let spec = GridSpec {
        r2_points: input.config.grid_r2,
        rho_points: input.config.grid_rho,
        criterion: opts.criterion,
        ..GridSpec::default()
    };
    let grid = killer_region(sm.estimate, sm.q, sm.sigma2_max, sm.var_w, sm.rho_bound, &spec, points);
    let bootstrap = match opts.bootstrap {
        Some(b) => {
            let spec = EstimatorSpec { style: input.config.estimator, augmented: opts.mode == Mode::Augmented };
            Some(bootstrap_interval(input, spec, b, input.config.seed)?)
        }
        None => None,
    };
    Ok(Analysis { weights, sate, run, extreme, benchmark, grid, bootstrap, flags })
}

pub fn killer_share(grid: &ContourGrid) -> f64 {
    let total = grid.killer_mask.iter().map(Vec::len).sum::<usize>();
    let hits = grid.killer_mask.iter().flatten().filter(|&&k| k).count();
    hits as f64 / total as f64
}

impl Analysis {
    /// Collects everything except input digests and option echoes.
    pub fn bundle(&self, input: &AnalysisInput, contour_file: &str) -> ReportBundle {
        let label = match self.run.summary.mode {
            Mode::Weighted => format!("{:?}", input.config.estimator).to_lowercase(),
            Mode::Augmented => "augmented".to_string(),
        };
        ReportBundle {
            config: Some(input.config.clone()),
            estimates: vec![
                EstimateEntry { label: "sate_dim".into(), estimate: self.sate.clone(), rv: None },
                EstimateEntry { label, estimate: self.run.estimate.clone(), rv: Some(self.run.summary.rv) },
            ],
            weights: Some(WeightSummary {
                method: self.weights.method,
                converged: self.weights.converged,
                iterations: self.weights.iterations,
                mean: self.weights.mean(),
                variance: self.weights.var(),
                balance: balance_table(&input.sample, &input.population, &self.weights),
            }),
            bootstrap: self.bootstrap.clone(),
            sensitivity: Some(self.run.summary.clone()),
            variance_bounds: Some(self.run.bounds.clone()),
            xi: self.run.xi.clone(),
            benchmark: self.benchmark.clone(),
            contour: Some(ContourRef {
                file: contour_file.to_string(),
                r2_points: self.grid.r2_axis.len(),
                rho_points: self.grid.rho_axis.len(),
                criterion: self.grid.criterion,
                killer_share: killer_share(&self.grid),
                diagonal_boundary: self.grid.diagonal_boundary_point(),
            }),
            extreme: Some(self.extreme.clone()),
            flags: self.flags.clone(),
            ..ReportBundle::default()
        }
    }
}
