use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weightsens::benchmark::{benchmark_table, parse_subsets, single_subsets, BenchmarkOptions};
use weightsens::data::{
    align, load_population, load_sample, AnalysisConfig, AnalysisInput, EstimatorStyle, KeyValues, Schema, Sigma2Assumption,
    WeightMethod,
};
use weightsens::estimators::{bootstrap_interval, sate_dim, EstimatorSpec};
use weightsens::pipeline::{analyze, killer_share, sensitivity_run, AnalyzeOptions};
use weightsens::report::{
    digest_file, emit_report, parse_report, render_contour, render_extreme_plot, ContourRef, ContourStyle, EstimateEntry,
    Format, ReportBundle, WeightSummary, DEFAULT_C_STAR,
};
use weightsens::sensitivity::{
    extreme_scenario, killer_region, rho_bound, BenchmarkPoint, GridSpec, KillerCriterion, Mode,
};
use weightsens::sim::{generate, oracle_verify, DgpConfig};
use weightsens::weights::{balance_table, fit_default};
use weightsens::{Error, Result};

#[derive(Parser)]
#[command(name = "weightsens", version, about = "Weighted PATE estimation and omitted-confounder sensitivity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit weights and report covariate balance.
    Weights(DataArgs),
    /// Point estimates, optionally with a bootstrap interval.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        augmented: bool,
        /// Bootstrap replicates (at least 100).
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Full sensitivity analysis: summary, bounds, benchmarks, contour and extreme scenario.
    Analyze {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long, default_value = "nullify")]
        criterion: KillerCriterion,
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Leave-covariates-out benchmark table.
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        bench: BenchArgs,
    },
    /// Bias contour plot from data or from summary parameters.
    Contour {
        #[command(flatten)]
        data: OptionalData,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "nullify")]
        criterion: KillerCriterion,
        /// Extra points as `label:r2:rho`; repeatable.
        #[arg(long = "point")]
        points: Vec<String>,
    },
    /// Extreme-scenario bounds and the adjusted-estimate plot.
    Extreme {
        #[command(flatten)]
        data: OptionalData,
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated cor(w*, tau) values for the plot.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c_star: Option<Vec<f64>>,
    },
    /// Run the Monte Carlo oracle on a synthetic population.
    Simulate {
        /// key=value file with DGP settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        replications: usize,
        /// Also write one draw as sample.csv and population.csv.
        #[arg(long)]
        write_data: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Re-emit a saved JSON report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    population: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Clone)]
struct OptionalData {
    #[arg(long, requires = "population")]
    sample: Option<PathBuf>,
    #[arg(long, requires = "sample")]
    population: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long, default_value = "treatment")]
    treatment: String,
    #[arg(long, default_value = "outcome")]
    outcome: String,
    /// Column of externally computed weights in the sample file.
    #[arg(long)]
    weights_column: Option<String>,
    /// Comma-separated covariate names; default is every other column.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// key=value analysis settings; command-line flags override them.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    weight_method: Option<WeightMethod>,
    #[arg(long)]
    estimator: Option<EstimatorStyle>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    sigma2_assumption: Option<Sigma2Assumption>,
    #[arg(long)]
    grid_r2: Option<usize>,
    #[arg(long)]
    grid_rho: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sensitivity for the augmented estimator instead of the weighted one.
    #[arg(long)]
    augmented_mode: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Clone)]
struct BenchArgs {
    #[arg(long, default_value_t = 1.0)]
    k_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    k_rho: f64,
    /// Groups separated by `;`, covariates within a group by `,`.
    #[arg(long)]
    subsets: Option<String>,
    /// Solve for k_sigma exactly instead of RV / R².
    #[arg(long)]
    exact_inversion: bool,
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    estimate: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    var_w: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    cor_w_tau: Option<f64>,
}

impl CommonArgs {
    fn config(&self) -> Result<AnalysisConfig> {
        let mut cfg = match &self.config {
            Some(p) => AnalysisConfig::from_file(p)?,
            None => AnalysisConfig::default(),
        };
        if let Some(v) = self.weight_method {
            cfg.weight_method = v;
        }
        if let Some(v) = self.estimator {
            cfg.estimator = v;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.sigma2_assumption {
            cfg.sigma2_assumption = v;
        }
        if let Some(v) = self.grid_r2 {
            cfg.grid_r2 = v;
        }
        if let Some(v) = self.grid_rho {
            cfg.grid_rho = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.weights_column.is_some() && self.weight_method.is_none() && self.config.is_none() {
            cfg.weight_method = WeightMethod::External;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn mode(&self) -> Mode {
        if self.augmented_mode {
            Mode::Augmented
        } else {
            Mode::Weighted
        }
    }

    fn load(&self, sample: &Path, population: &Path) -> Result<(AnalysisInput, ReportBundle)> {
        let mut schema = Schema::sample(&self.treatment, &self.outcome);
        schema.weights = self.weights_column.clone();
        schema.covariates = self.covariates.clone();
        let pschema = Schema { covariates: self.covariates.clone(), ..Schema::default() };
        let s = load_sample(sample, &schema)?;
        let p = load_population(population, &pschema)?;
        let input = align(s, p, self.config()?)?;
        let mut options = BTreeMap::new();
        options.insert("treatment".to_string(), self.treatment.clone());
        options.insert("outcome".to_string(), self.outcome.clone());
        if let Some(w) = &self.weights_column {
            options.insert("weights_column".to_string(), w.clone());
        }
        options.insert("covariates".to_string(), input.sample.covariate_names.join(","));
        options.insert("mode".to_string(), format!("{:?}", self.mode()).to_lowercase());
        let bundle = ReportBundle {
            inputs: vec![digest_file("sample", sample)?, digest_file("population", population)?],
            config: Some(input.config.clone()),
            options,
            flags: input.flags.clone(),
            ..ReportBundle::default()
        };
        Ok((input, bundle))
    }
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    Ok(dir.join(name))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = out_path(dir, name)?;
    std::fs::write(&path, text).map_err(|source| Error::Io { path: path.clone(), source })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_reports(dir: &Path, bundle: &ReportBundle) -> Result<()> {
    write(dir, "report.json", &emit_report(bundle, Format::Json)?)?;
    let text = emit_report(bundle, Format::Text)?;
    write(dir, "report.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn bench_options(b: &BenchArgs) -> BenchmarkOptions {
    BenchmarkOptions { k_sigma: b.k_sigma, k_rho: b.k_rho, exact_inversion: b.exact_inversion }
}

fn parse_point(s: &str) -> Result<BenchmarkPoint> {
    let bad = || Error::InvalidParameter(format!("expected label:r2:rho, got `{s}`"));
    let mut parts = s.rsplitn(3, ':');
    let rho = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let r2 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let label = parts.next().ok_or_else(bad)?.to_string();
    Ok(BenchmarkPoint { r2, rho, label })
}

/// Summary parameters from data, or taken directly from the command line.
struct Params {
    estimate: f64,
    sigma2: f64,
    var_w: f64,
    cor_w_tau: f64,
    q: f64,
    grid: (usize, usize),
    bundle: ReportBundle,
}

fn params(data: &OptionalData, p: &ParamArgs) -> Result<Params> {
    match (&data.sample, &data.population) {
        (Some(s), Some(pp)) => {
            let (input, mut bundle) = data.common.load(s, pp)?;
            let w = fit_default(&input)?;
            let run = sensitivity_run(&input, &w, data.common.mode())?;
            let sm = run.summary.clone();
            bundle.estimates.push(EstimateEntry { label: "estimate".into(), estimate: run.estimate, rv: Some(sm.rv) });
            bundle.variance_bounds = Some(run.bounds);
            bundle.xi = run.xi;
            bundle.sensitivity = Some(sm.clone());
            Ok(Params {
                estimate: sm.estimate,
                sigma2: sm.sigma2_max,
                var_w: sm.var_w,
                cor_w_tau: sm.cor_w_tau_hat,
                q: sm.q,
                grid: (input.config.grid_r2, input.config.grid_rho),
                bundle,
            })
        }
        _ => {
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| Error::InvalidParameter(format!("--{name} is required without --sample/--population")))
            };
            let cfg = data.common.config()?;
            let mut options = BTreeMap::new();
            for (k, v) in [("estimate", p.estimate), ("sigma2", p.sigma2), ("var_w", p.var_w), ("cor_w_tau", p.cor_w_tau)] {
                if let Some(v) = v {
                    options.insert(k.to_string(), v.to_string());
                }
            }
            Ok(Params {
                estimate: need(p.estimate, "estimate")?,
                sigma2: need(p.sigma2, "sigma2")?,
                var_w: need(p.var_w, "var-w")?,
                cor_w_tau: p.cor_w_tau.unwrap_or(0.0),
                q: cfg.q,
                grid: (cfg.grid_r2, cfg.grid_rho),
                bundle: ReportBundle { config: Some(cfg), options, ..ReportBundle::default() },
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Weights(d) => {
            let (input, mut bundle) = d.common.load(&d.sample, &d.population)?;
            let w = fit_default(&input)?;
            let mut csv = String::from("row,weight\n");
            for (i, v) in w.values.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", i + 1, v));
            }
            write(&d.common.out_dir, "weights.csv", &csv)?;
            bundle.weights = Some(WeightSummary {
                method: w.method,
                converged: w.converged,
                iterations: w.iterations,
                mean: w.mean(),
                variance: w.var(),
                balance: balance_table(&input.sample, &input.population, &w),
            });
            write_reports(&d.common.out_dir, &bundle)?;
        }
        Command::Estimate { data, augmented, bootstrap } => {
            let (input, mut bundle) = data.common.load(&data.sample, &data.population)?;
            let w = fit_default(&input)?;
            bundle.estimates.push(EstimateEntry { label: "sate_dim".into(), estimate: sate_dim(&input.sample)?, rv: None });
            let plain = EstimatorSpec { style: input.config.estimator, augmented: false };
            let label = format!("{:?}", input.config.estimator).to_lowercase();
            bundle.estimates.push(EstimateEntry {
                label,
                estimate: weightsens::estimators::estimate_with(&input, &w, plain)?,
                rv: None,
            });
            let spec = EstimatorSpec { augmented, ..plain };
            if augmented {
                bundle.estimates.push(EstimateEntry {
                    label: "augmented".into(),
                    estimate: weightsens::estimators::estimate_with(&input, &w, spec)?,
                    rv: None,
                });
            }
            if let Some(b) = bootstrap {
                bundle.bootstrap = Some(bootstrap_interval(&input, spec, b, input.config.seed)?);
            }
            write_reports(&data.common.out_dir, &bundle)?;
        }
        Command::Analyze { data, bench, criterion, bootstrap } => {
            let (input, mut bundle) = data.common.load(&data.sample, &data.population)?;
            let subsets = bench.subsets.as_deref().map(|s| parse_subsets(s, &input.sample.covariate_names)).transpose()?;
            let opts = AnalyzeOptions { mode: data.common.mode(), criterion, subsets, benchmark: bench_options(&bench), bootstrap };
            let a = analyze(&input, &opts)?;
            let dir = &data.common.out_dir;
            write(dir, "contour.svg", &render_contour(&a.grid, &ContourStyle::default())?)?;
            let sm = &a.run.summary;
            write(dir, "extreme.svg", &render_extreme_plot(sm.estimate, sm.sigma2_max, sm.var_w, sm.cor_w_tau_hat, &DEFAULT_C_STAR))?;
            if let Some(t) = &a.benchmark {
                write(dir, "benchmark.csv", &t.to_csv())?;
            }
            let full = a.bundle(&input, "contour.svg");
            bundle = ReportBundle { inputs: bundle.inputs, options: bundle.options, ..full };
            write_reports(dir, &bundle)?;
            if a.benchmark.as_ref().is_some_and(|t| !t.errors.is_empty()) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Benchmark { data, bench } => {
            let (input, mut bundle) = data.common.load(&data.sample, &data.population)?;
            let w = fit_default(&input)?;
            let run = sensitivity_run(&input, &w, data.common.mode())?;
            let subsets = match &bench.subsets {
                Some(s) => parse_subsets(s, &input.sample.covariate_names)?,
                None => single_subsets(&input.sample.covariate_names),
            };
            let table = benchmark_table(&input, &w, &run.summary, &subsets, bench_options(&bench), run.model.as_ref())?;
            write(&data.common.out_dir, "benchmark.csv", &table.to_csv())?;
            let failed = !table.errors.is_empty();
            bundle.estimates.push(EstimateEntry { label: "estimate".into(), estimate: run.estimate, rv: Some(run.summary.rv) });
            bundle.sensitivity = Some(run.summary);
            bundle.variance_bounds = Some(run.bounds);
            bundle.xi = run.xi;
            bundle.benchmark = Some(table);
            write_reports(&data.common.out_dir, &bundle)?;
            if failed {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Contour { data, params: pa, criterion, points } => {
            let p = params(&data, &pa)?;
            let points = points.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>>>()?;
            let spec = GridSpec { r2_points: p.grid.0, rho_points: p.grid.1, criterion, ..GridSpec::default() };
            let grid = killer_region(p.estimate, p.q, p.sigma2, p.var_w, rho_bound(p.cor_w_tau), &spec, points);
            write(&data.common.out_dir, "contour.svg", &render_contour(&grid, &ContourStyle::default())?)?;
            let mut bundle = p.bundle;
            bundle.contour = Some(ContourRef {
                file: "contour.svg".into(),
                r2_points: grid.r2_axis.len(),
                rho_points: grid.rho_axis.len(),
                criterion,
                killer_share: killer_share(&grid),
                diagonal_boundary: grid.diagonal_boundary_point(),
            });
            write_reports(&data.common.out_dir, &bundle)?;
        }
        Command::Extreme { data, params: pa, c_star } => {
            let p = params(&data, &pa)?;
            let c_star = c_star.unwrap_or_else(|| DEFAULT_C_STAR.to_vec());
            if let Some(c) = c_star.iter().find(|c| c.abs() > 1.0) {
                return Err(Error::InvalidParameter(format!("c* values must lie in [-1, 1], got {c}")));
            }
            write(&data.common.out_dir, "extreme.svg", &render_extreme_plot(p.estimate, p.sigma2, p.var_w, p.cor_w_tau, &c_star))?;
            let mut bundle = p.bundle;
            bundle.extreme = Some(extreme_scenario(p.cor_w_tau, None, p.sigma2, p.var_w)?);
            write_reports(&data.common.out_dir, &bundle)?;
        }
        Command::Simulate { config, replications, write_data, out_dir } => {
            let (cfg, inputs) = match &config {
                Some(path) => {
                    let mut kv = KeyValues::read(path)?;
                    let cfg = DgpConfig::take_from(&mut kv)?;
                    kv.finish()?;
                    (cfg, vec![digest_file("dgp_config", path)?])
                }
                None => (DgpConfig::default(), vec![]),
            };
            if write_data {
                let g = generate(&cfg)?;
                weightsens::data::write_sample(&out_path(&out_dir, "sample.csv")?, &g.sample)?;
                weightsens::data::write_population(&out_path(&out_dir, "population.csv")?, &g.population)?;
            }
            let report = oracle_verify(&cfg, replications)?;
            let pass = report.all_pass();
            let mut options = BTreeMap::new();
            options.insert("replications".to_string(), replications.to_string());
            let bundle = ReportBundle { inputs, options, oracle: Some(report), ..ReportBundle::default() };
            write_reports(&out_dir, &bundle)?;
            if !pass {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Report { input, format, out_dir } => {
            let text = std::fs::read_to_string(&input).map_err(|source| Error::Io { path: input.clone(), source })?;
            let bundle = parse_report(&text)?;
            let out = emit_report(&bundle, format)?;
            let name = match format {
                Format::Json => "report.json",
                Format::Text => "report.txt",
            };
            write(&out_dir, name, &out)?;
            print!("{out}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
