use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use weightsens::benchmark::{benchmark_transform, k_sigma_exact};
use weightsens::data::{EstimatorStyle, Sigma2Assumption};
use weightsens::estimators::weighted_pate_raw;
use weightsens::report::sig4;
use weightsens::report::svg::num;
use weightsens::sensitivity::{
    bias, extreme_scenario, is_killer, killer_region, robustness_value, rv_from_a, sigma_tau_bounds, GridSpec,
    KillerCriterion,
};
use weightsens::sim::discrete::DiscreteModel;
use weightsens::stats;
use weightsens::weights::{balance_from_matrices, entropy_balance};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rv_solves_its_defining_equation(a in 1e-8f64..1e4) {
        let rv = rv_from_a(a);
        prop_assert!((0.0..1.0).contains(&rv));
        // The check RV²/(1−RV) amplifies rounding in 1 − RV by about a, so larger a
        // cannot meet this tolerance in double precision.
        prop_assert!((rv * rv / (1.0 - rv) - a).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn rv_is_increasing(a in 1e-8f64..1e12, f in 1.01f64..10.0) {
        prop_assert!(rv_from_a(a * f) > rv_from_a(a));
        prop_assert!(rv_from_a(a * f) < 1.0);
    }

    #[test]
    fn bias_at_rv_diagonal_equals_q_times_estimate(
        est in 0.05f64..5.0, q in 0.05f64..=1.0, sigma2 in 0.1f64..20.0, var_w in 0.05f64..5.0,
    ) {
        let rv = robustness_value(est, q, sigma2, var_w).unwrap();
        let b = bias(rv, rv.sqrt(), sigma2, var_w);
        prop_assert!((b - q * est).abs() <= 1e-9 * est.max(1.0));
    }

    #[test]
    fn bias_is_odd_in_rho_and_grows_with_r2(r2 in 0.0f64..0.98, d in 0.001f64..0.01, rho in -1.0f64..1.0, s2 in 0.1f64..10.0, vw in 0.1f64..3.0) {
        prop_assert_eq!(bias(r2, -rho, s2, vw), -bias(r2, rho, s2, vw));
        prop_assert!(bias(r2 + d, rho.abs(), s2, vw) >= bias(r2, rho.abs(), s2, vw));
    }

    #[test]
    fn killer_grid_is_antisymmetric_in_rho(est in -3.0f64..3.0, s2 in 0.5f64..10.0, vw in 0.1f64..2.0, bound in 0.1f64..=1.0) {
        let spec = GridSpec { r2_points: 9, rho_points: 11, ..GridSpec::default() };
        let g = killer_region(est, 1.0, s2, vw, bound, &spec, vec![]);
        let n = g.rho_axis.len();
        for i in 0..n {
            prop_assert_eq!(g.rho_axis[i], -g.rho_axis[n - 1 - i]);
            for j in 0..g.r2_axis.len() {
                prop_assert_eq!(g.bias[i][j], -g.bias[n - 1 - i][j]);
                prop_assert_eq!(g.killer_mask[i][j], is_killer(est, g.bias[i][j], 1.0, KillerCriterion::Nullify));
            }
        }
    }

    #[test]
    fn sign_flip_region_is_inside_nullify_region(est in -3.0f64..3.0, b in -10.0f64..10.0, q in 0.05f64..=1.0) {
        if is_killer(est, b, q, KillerCriterion::SignFlip) {
            prop_assert!(is_killer(est, b, q, KillerCriterion::Nullify));
        }
    }

    #[test]
    fn benchmark_transform_is_monotone_and_bounded(r2 in 0.0f64..5.0, rho in -1.0f64..1.0, k1 in 0.0f64..10.0, dk in 0.0f64..10.0, bound in 0.0f64..=1.0) {
        let a = benchmark_transform(r2, rho, k1, 1.0, bound);
        let b = benchmark_transform(r2, rho, k1 + dk, 1.0, bound);
        prop_assert!((0.0..1.0).contains(&a.r2_bench));
        prop_assert!(b.r2_bench >= a.r2_bench);
        prop_assert!(a.rho_bench.abs() <= bound);
    }

    #[test]
    fn exact_k_sigma_lands_on_rv(rv in 0.001f64..0.99, r2 in 0.001f64..3.0) {
        let k = k_sigma_exact(rv, r2).unwrap();
        let t = benchmark_transform(r2, 0.0, k, 1.0, 1.0);
        prop_assert!((t.r2_bench - rv).abs() <= 1e-12);
    }

    #[test]
    fn extreme_roots_are_ordered_probabilities(c in -0.99f64..0.99, cs in -0.99f64..0.99) {
        let e = extreme_scenario(c, Some(cs), 1.0, 1.0).unwrap();
        let (lo, hi) = e.r2_roots.unwrap();
        prop_assert!(0.0 <= lo && lo <= hi && hi <= 1.0);
        prop_assert_eq!(e.r2_max, hi);
        prop_assert!((e.rho_max * e.rho_max + c * c - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fh_bounds_contain_every_permutation_coupling(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8), seed in any::<u64>(),
    ) {
        let y1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut y0: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let b = sigma_tau_bounds(&y1, &y0, Sigma2Assumption::None).unwrap();
        prop_assert!(0.0 <= b.lower && b.lower <= b.upper);
        y0.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let tau: Vec<f64> = y1.iter().zip(&y0).map(|(a, c)| a - c).collect();
        let v = stats::var(&tau);
        prop_assert!(v >= b.lower - 1e-10 && v <= b.upper + 1e-10);
    }

    #[test]
    fn fh_bounds_ignore_location_shifts(
        y1 in prop::collection::vec(-5.0f64..5.0, 1..10), y0 in prop::collection::vec(-5.0f64..5.0, 1..10), s in -3.0f64..3.0,
    ) {
        let a = sigma_tau_bounds(&y1, &y0, Sigma2Assumption::None).unwrap();
        let y1s: Vec<f64> = y1.iter().map(|v| v + s).collect();
        let b = sigma_tau_bounds(&y1s, &y0, Sigma2Assumption::None).unwrap();
        prop_assert!((a.lower - b.lower).abs() <= 1e-9 && (a.upper - b.upper).abs() <= 1e-9);
    }

    #[test]
    fn entropy_weights_balance_feasible_targets(seed in any::<u64>(), shift in -0.3f64..0.3) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(150, 3, |_, _| rng.random_range(-1.0..1.0));
        let target: Vec<f64> = (0..3).map(|j| x.column(j).mean() + shift * (j as f64 - 1.0)).collect();
        let w = entropy_balance(&x, &target).unwrap();
        prop_assert!(w.values.iter().all(|&v| v > 0.0));
        prop_assert!((stats::mean(&w.values) - 1.0).abs() <= 1e-10);
        for (j, &t) in target.iter().enumerate() {
            let m = stats::sum(x.column(j).iter().zip(&w.values).map(|(a, b)| a * b)) / 150.0;
            prop_assert!((m - t).abs() <= 1e-8);
        }
        let xp = DMatrix::from_fn(1, 3, |_, j| target[j]);
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let bal = balance_from_matrices(&x, &xp, &names, &w.values);
        prop_assert!(bal.rows.iter().all(|r| r.std_diff_weighted.abs() <= 1e-8));
    }

    #[test]
    fn hajek_is_scale_invariant(
        rows in prop::collection::vec((any::<bool>(), -5.0f64..5.0, 0.1f64..3.0), 4..30), k in 0.1f64..10.0,
    ) {
        let t: Vec<bool> = rows.iter().map(|r| r.0).collect();
        prop_assume!(t.iter().any(|&v| v) && t.iter().any(|&v| !v));
        let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let wk: Vec<f64> = w.iter().map(|v| v * k).collect();
        let a = weighted_pate_raw(&t, &y, &w, EstimatorStyle::Hajek).unwrap().value;
        let b = weighted_pate_raw(&t, &y, &wk, EstimatorStyle::Hajek).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn discrete_identities_hold(
        p in prop::array::uniform4(0.05f64..1.0), a in -2.0f64..1.0, bx in -1.5f64..1.5, bu in -1.5f64..1.5,
        tau in prop::array::uniform4(-3.0f64..3.0), th in prop::array::uniform2(-3.0f64..3.0),
    ) {
        let s: f64 = p.iter().sum();
        let pxu = [[p[0] / s, p[1] / s], [p[2] / s, p[3] / s]];
        let m = DiscreteModel::from_logistic(pxu, a, bx, bu, [[tau[0], tau[1]], [tau[2], tau[3]]], th).unwrap();
        for id in m.identities() {
            prop_assert!(id.error() <= 1e-9, "{} lhs {} rhs {}", id.name, id.lhs, id.rhs);
        }
    }

    #[test]
    fn svg_numbers_have_two_decimals(v in -1e4f64..1e4) {
        let s = num(v);
        prop_assert!(s != "-0.00");
        prop_assert_eq!(s.split('.').nth(1).map(str::len), Some(2));
    }

    #[test]
    fn sig4_keeps_four_significant_digits(v in 1e-3f64..9999.0) {
        let s = sig4(v);
        let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
        prop_assert_eq!(digits, 4, "{}", s);
        prop_assert!((s.parse::<f64>().unwrap() - v).abs() <= v * 1e-3);
    }
}
