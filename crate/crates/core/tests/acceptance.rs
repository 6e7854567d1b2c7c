//! Acceptance suite. Runs without the libtest harness so every check prints a
//! PASS or FAIL line; the process exits nonzero if any check fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weightsens::benchmark::{assess, BenchContext};
use weightsens::data::{align, AnalysisConfig, Sigma2Assumption};
use weightsens::pipeline::{analyze, AnalyzeOptions};
use weightsens::report::{emit_report, render_contour, render_extreme_plot, ContourStyle, Format, DEFAULT_C_STAR};
use weightsens::sensitivity::{
    bias, extreme_scenario, killer_region, robustness_value, rv_from_a, sigma_tau_bounds, var_w_from_rv, GridSpec,
};
use weightsens::sim::{generate, oracle_verify, DgpConfig};
use weightsens::stats;
use weightsens::weights::{balance_from_matrices, entropy_balance};

// Omaha summary values.
const OMAHA_EST: f64 = 1.36;
const OMAHA_SIGMA2: f64 = 8.4;
const OMAHA_RV: f64 = 0.41;

// Criterion 1
const TOL_BIAS: f64 = 0.03;
const TOL_MRCS: f64 = 0.15;
const TOL_K: f64 = 0.1;
const MIN_R2_ROW: f64 = 0.04;
// The k minima are gated on the rows named with them; other rows print as INFO.
const K_SIGMA_ROWS: [&str; 3] = ["Black", "Age", "Married"];
const K_RHO_ROWS: [&str; 3] = ["Prev. Earnings", "Age", "Black"];
const REPLAY_BUDGET: Duration = Duration::from_secs(1);
// Criterion 2
const CC_TOL_BIAS: f64 = 0.05;
const CC_TOL_MRCS: f64 = 0.2;
// Criterion 3
const RV_TRIALS: usize = 1000;
const TOL_RV_FIXED_POINT: f64 = 1e-10;
const TOL_RV_HALF: f64 = 1e-12;
// Criterion 4
const TOL_EXTREME_IDENTITY: f64 = 1e-12;
const TOL_EXTREME_PRINTED: f64 = 0.002;
// Criterion 5
const TOL_ANCHOR: f64 = 0.02;
// Criterion 6
const ORACLE_REPS: usize = 500;
const ORACLE_BUDGET: Duration = Duration::from_secs(120);
// Criterion 7
const TOL_FH_EXACT: f64 = 1e-12;
const FH_TRIALS: usize = 10_000;
const TOL_FH_CONTAIN: f64 = 1e-12;
// Criterion 8
const TOL_BALANCE: f64 = 1e-8;
const TOL_CLOSED_FORM: f64 = 1e-10;

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, criterion: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{criterion}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn info(&mut self, criterion: u32, name: &str, got: f64, printed: f64) {
        println!("INFO [{criterion}] {name}: got {got:.6}, printed {printed}");
    }

    fn close(&mut self, criterion: u32, name: &str, got: f64, want: f64, tol: f64) {
        let pass = (got - want).abs() <= tol;
        self.check(criterion, name, pass, format!("got {got:.6}, want {want} +/- {tol:e}"));
    }
}

fn omaha_var_w() -> f64 {
    var_w_from_rv(OMAHA_EST, 1.0, OMAHA_SIGMA2, OMAHA_RV)
}

/// Printed benchmark rows: label, R², ρ, bias, MRCS, k_σ^min, k_ρ^min.
const OMAHA_ROWS: [(&str, f64, f64, f64, f64, f64, f64); 8] = [
    ("Prev. Earnings", 0.04, 0.59, 0.31, 4.4, 10.0, 1.1),
    ("Age", 0.06, 0.75, 0.48, 2.83, 7.0, 0.9),
    ("Married", 0.11, 0.19, 0.17, 7.9, 3.8, 3.3),
    ("Hourly Wage", 0.05, -0.42, -0.25, -5.5, 8.3, -1.5),
    ("Black", 0.20, -0.49, -0.63, -2.2, 2.0, -1.3),
    ("Hisp.", 0.14, -0.10, -0.10, -14.0, 3.0, -6.7),
    ("HS/GED", 0.12, 0.08, 0.07, 18.2, 3.5, 7.9),
    ("Years of Educ.", 0.00, 0.28, 0.02, 59.7, 409.0, 2.3),
];

/// Rows whose benchmarked R² is already the transformed value, so k = 1 leaves it unchanged:
/// invert `R²/(1+R²)` before feeding the row to `assess`.
fn untransform(r2: f64) -> f64 {
    r2 / (1.0 - r2)
}

fn criterion_1(s: &mut Suite) {
    let start = Instant::now();
    let var_w = omaha_var_w();
    let rv = robustness_value(OMAHA_EST, 1.0, OMAHA_SIGMA2, var_w).unwrap();
    let ctx = BenchContext { estimate: OMAHA_EST, sigma2: OMAHA_SIGMA2, var_w, rv, rho_bound: 1.0 };
    s.close(1, "derived var_w", var_w, 0.773, 0.0005);
    for &(label, r2, rho, b, m, ks, kr) in OMAHA_ROWS.iter().filter(|r| r.1 >= MIN_R2_ROW) {
        let row = assess(&ctx, label, untransform(r2), rho, 1.0, 1.0, false);
        s.close(1, &format!("{label} bias"), row.est_bias, b, TOL_BIAS);
        s.close(1, &format!("{label} MRCS"), row.mrcs.unwrap(), m, TOL_MRCS);
        let (got_ks, got_kr) = (row.k_sigma_min.unwrap(), row.k_rho_min.unwrap());
        if K_SIGMA_ROWS.contains(&label) {
            s.close(1, &format!("{label} k_sigma_min"), got_ks, ks, TOL_K);
        } else {
            s.info(1, &format!("{label} k_sigma_min"), got_ks, ks);
        }
        if K_RHO_ROWS.contains(&label) {
            s.close(1, &format!("{label} k_rho_min"), got_kr, kr, TOL_K);
        } else {
            s.info(1, &format!("{label} k_rho_min"), got_kr, kr);
        }
    }
    let took = start.elapsed();
    s.check(1, "runtime", took < REPLAY_BUDGET, format!("{took:?} < {REPLAY_BUDGET:?}"));
}

fn criterion_2(s: &mut Suite) {
    let start = Instant::now();
    let (est, sigma2, rv) = (0.73, 10.04, 0.14);
    let var_w = var_w_from_rv(est, 1.0, sigma2, rv);
    s.close(2, "derived var_w", var_w, 2.33, 0.01);
    let ctx = BenchContext { estimate: est, sigma2, var_w, rv, rho_bound: 1.0 };
    let row = assess(&ctx, "Black", untransform(0.01), 0.94, 1.0, 1.0, false);
    s.close(2, "Black bias", row.est_bias, 0.48, CC_TOL_BIAS);
    s.close(2, "Black MRCS", row.mrcs.unwrap(), 1.52, CC_TOL_MRCS);
    let took = start.elapsed();
    s.check(2, "runtime", took < REPLAY_BUDGET, format!("{took:?} < {REPLAY_BUDGET:?}"));
}

fn criterion_3(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..RV_TRIALS {
        let est = rng.random_range(-5.0..5.0);
        let q = rng.random_range(0.05..=1.0);
        let sigma2 = rng.random_range(0.1..20.0);
        let var_w = rng.random_range(0.01..5.0);
        let a = q * q * est * est / (sigma2 * var_w);
        let rv = robustness_value(est, q, sigma2, var_w).unwrap();
        // Relative for a > 1: RV²/(1−RV) amplifies the rounding of 1 − RV by a.
        worst = worst.max((rv * rv / (1.0 - rv) - a).abs() / a.max(1.0));
    }
    s.check(3, "fixed point over random inputs", worst <= TOL_RV_FIXED_POINT, format!("worst error {worst:.3e} <= {TOL_RV_FIXED_POINT:e}"));
    s.close(3, "RV(a = 0.5)", rv_from_a(0.5), 0.5, TOL_RV_HALF);
}

fn criterion_4(s: &mut Suite) {
    let mut worst: f64 = 0.0;
    for k in 0..=200 {
        let c = -1.0 + k as f64 * 0.01;
        let e = extreme_scenario(c, None, 8.4, 0.773).unwrap();
        worst = worst.max((e.r2_max - (1.0 - c * c)).abs());
    }
    s.check(4, "R2_max = 1 - cor^2", worst <= TOL_EXTREME_IDENTITY, format!("worst error {worst:.3e}"));
    let e = extreme_scenario(0.07, None, 8.4, 0.773).unwrap();
    s.close(4, "rho_max at cor 0.07 (computed)", e.rho_max, 0.9975, 5e-5);
    s.close(4, "R2_max at cor 0.07 (computed)", e.r2_max, 0.9951, 5e-5);
    s.close(4, "rho_max vs printed", e.rho_max, 0.997, TOL_EXTREME_PRINTED);
    s.close(4, "R2_max vs printed", e.r2_max, 0.994, TOL_EXTREME_PRINTED);
}

fn criterion_5(s: &mut Suite) {
    let var_w = omaha_var_w();
    s.close(5, "bias at (0.25, 0.93)", bias(0.25, 0.93, OMAHA_SIGMA2, var_w), OMAHA_EST, TOL_ANCHOR);
    s.close(5, "bias at (0.75, 0.31)", bias(0.75, 0.31, OMAHA_SIGMA2, var_w), OMAHA_EST, TOL_ANCHOR);
    let spec = GridSpec::default();
    let grid = killer_region(OMAHA_EST, 1.0, OMAHA_SIGMA2, var_w, 1.0, &spec, vec![]);
    let d_r2 = grid.r2_axis[1] - grid.r2_axis[0];
    let d_rho = grid.rho_axis[1] - grid.rho_axis[0];
    let rv = robustness_value(OMAHA_EST, 1.0, OMAHA_SIGMA2, var_w).unwrap();
    let (r2, rho) = grid.diagonal_boundary_point().unwrap();
    // One cell: within one step on each axis of the point (RV, sqrt(RV)).
    let pass = (r2 - rv).abs() <= d_r2 && (rho - rv.sqrt()).abs() <= d_rho;
    s.check(
        5,
        "boundary point nearest rho^2 = R2",
        pass,
        format!("({r2:.5}, {rho:.5}) vs ({rv:.5}, {:.5}); cell {d_r2:.5} x {d_rho:.5}", rv.sqrt()),
    );
}

fn criterion_6(s: &mut Suite) {
    let start = Instant::now();
    let report = oracle_verify(&DgpConfig::default(), ORACLE_REPS).unwrap();
    let took = start.elapsed();
    for c in &report.checks {
        s.check(6, &c.name, c.pass, format!("{:?}: analytic {:.6}, empirical {:.6}, tolerance {:.3e}", c.kind, c.analytic, c.empirical, c.tolerance));
    }
    s.check(6, "replications without failure", report.failed == 0, format!("{} of {}", report.failed, report.replications));
    s.check(6, "runtime", took < ORACLE_BUDGET, format!("{took:?} < {ORACLE_BUDGET:?}"));
}

fn criterion_7(s: &mut Suite) {
    let b = sigma_tau_bounds(&[0.0, 1.0], &[0.0, 1.0], Sigma2Assumption::None).unwrap();
    s.close(7, "two-point lower", b.lower, 0.0, TOL_FH_EXACT);
    s.close(7, "two-point upper", b.upper, 1.0, TOL_FH_EXACT);
    let y1 = [1.0, 4.0, 2.5, -0.5, 3.0];
    let b = sigma_tau_bounds(&y1, &[2.0; 4], Sigma2Assumption::None).unwrap();
    s.close(7, "constant control lower", b.lower, stats::var(&y1), TOL_FH_EXACT);
    s.close(7, "constant control upper", b.upper, stats::var(&y1), TOL_FH_EXACT);

    // A coupling of arms of sizes n1, n0 pairs n0 copies of each treated
    // value with n1 copies of each control value.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut escapes = 0;
    for _ in 0..FH_TRIALS {
        let n1 = rng.random_range(1..=5usize);
        let n0 = rng.random_range(1..=5usize);
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c: Vec<f64> = (0..n0).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b = sigma_tau_bounds(&a, &c, Sigma2Assumption::None).unwrap();
        let left: Vec<f64> = a.iter().flat_map(|&v| std::iter::repeat_n(v, n0)).collect();
        let mut right: Vec<f64> = c.iter().flat_map(|&v| std::iter::repeat_n(v, n1)).collect();
        right.shuffle(&mut rng);
        let tau: Vec<f64> = left.iter().zip(&right).map(|(x, y)| x - y).collect();
        let v = stats::var(&tau);
        if v < b.lower - TOL_FH_CONTAIN || v > b.upper + TOL_FH_CONTAIN {
            escapes += 1;
        }
    }
    s.check(7, "random couplings inside bounds", escapes == 0, format!("{escapes} escapes in {FH_TRIALS} trials"));
}

fn criterion_8(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, p) = (400, 4);
    let xs = DMatrix::from_fn(n, p, |_, j| rng.random_range(-1.0..1.0) + 0.3 * j as f64);
    let xp = DMatrix::from_fn(2000, p, |_, j| rng.random_range(-1.0..1.0) + 0.3 * j as f64 + 0.15);
    let target: Vec<f64> = xp.column_iter().map(|c| c.mean()).collect();
    let w = entropy_balance(&xs, &target).unwrap();
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let bal = balance_from_matrices(&xs, &xp, &names, &w.values);
    let worst = bal.rows.iter().map(|r| r.std_diff_weighted.abs()).fold(0.0, f64::max);
    s.check(8, "post-weight standardized differences", worst <= TOL_BALANCE, format!("worst {worst:.3e} <= {TOL_BALANCE:e}"));

    let xb = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
    let w = entropy_balance(&xb, &[0.75]).unwrap();
    let want = [1.5, 1.5, 0.5, 0.5];
    let err = w.values.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    s.check(8, "single binary covariate closed form", err <= TOL_CLOSED_FORM, format!("max error {err:.3e}"));
}

fn criterion_9(s: &mut Suite) {
    let cfg = DgpConfig { n: 600, pop_n: 3000, ..DgpConfig::default() };
    let run = || {
        let g = generate(&cfg).unwrap();
        let input = align(g.sample, g.population, AnalysisConfig { grid_r2: 120, grid_rho: 120, ..AnalysisConfig::default() }).unwrap();
        let a = analyze(&input, &AnalyzeOptions { bootstrap: Some(200), ..AnalyzeOptions::default() }).unwrap();
        let sm = &a.run.summary;
        let json = emit_report(&a.bundle(&input, "contour.svg"), Format::Json).unwrap();
        let contour = render_contour(&a.grid, &ContourStyle::default()).unwrap();
        let extreme = render_extreme_plot(sm.estimate, sm.sigma2_max, sm.var_w, sm.cor_w_tau_hat, &DEFAULT_C_STAR);
        (json, contour, extreme)
    };
    let first = run();
    let second = run();
    s.check(9, "JSON report", first.0 == second.0, format!("{} bytes", first.0.len()));
    s.check(9, "contour SVG", first.1 == second.1, format!("{} bytes", first.1.len()));
    s.check(9, "extreme SVG", first.2 == second.2, format!("{} bytes", first.2.len()));
}

fn main() {
    let mut s = Suite { failures: 0 };
    criterion_1(&mut s);
    criterion_2(&mut s);
    criterion_3(&mut s);
    criterion_4(&mut s);
    criterion_5(&mut s);
    criterion_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    criterion_9(&mut s);
    println!("acceptance: {} failing checks", s.failures);
    if s.failures > 0 {
        std::process::exit(1);
    }
}
