//! Entropy balancing by Newton iterations on the exponential-tilting dual.

use nalgebra::{DMatrix, DVector};

use super::{WeightSet, MEAN_ONE_TOL};
use crate::data::WeightMethod;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct EntropyOptions {
    pub max_iter: usize,
    /// Largest allowed balance violation, in internal standard-deviation units.
    pub tol: f64,
    /// Starting tilt on the original covariate scale (one entry per column).
    pub warm_start: Option<Vec<f64>>,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-8, warm_start: None }
    }
}

pub fn entropy_balance(x: &DMatrix<f64>, target_means: &[f64]) -> Result<WeightSet> {
    entropy_balance_with(x, target_means, &EntropyOptions::default())
}

/// Dual objective `log mean exp(lambda'z) - lambda't` with its max-shift.
fn objective(z: &DMatrix<f64>, t: &DVector<f64>, lambda: &DVector<f64>) -> (f64, DVector<f64>) {
    let eta = z * lambda;
    let m = eta.max();
    let e = eta.map(|v| (v - m).exp());
    let s = e.sum();
    let f = m + (s / z.nrows() as f64).ln() - lambda.dot(t);
    (f, e / s)
}

pub fn entropy_balance_with(x: &DMatrix<f64>, target_means: &[f64], opts: &EntropyOptions) -> Result<WeightSet> {
    let (n, p) = x.shape();
    if target_means.len() != p {
        return Err(Error::InvalidParameter(format!("{} target means for {} covariates", target_means.len(), p)));
    }
    if target_means.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("population means must be finite".into()));
    }
    if n == 0 {
        return Err(Error::InvalidData("empty sample".into()));
    }
    if p == 0 {
        return Ok(WeightSet::uniform(n));
    }

    let dependent = linalg::dependent_columns(x);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent.iter().map(|j| format!("column {j}")).collect()));
    }

    let mu: Vec<f64> = x.column_iter().map(|c| c.sum() / n as f64).collect();
    let sd: Vec<f64> = x
        .column_iter()
        .zip(&mu)
        .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    let z = DMatrix::from_fn(n, p, |i, j| (x[(i, j)] - mu[j]) / sd[j]);
    let t = DVector::from_fn(p, |j, _| (target_means[j] - mu[j]) / sd[j]);

    let mut lambda = match &opts.warm_start {
        Some(w) if w.len() == p => DVector::from_fn(p, |j, _| w[j] * sd[j]),
        _ => DVector::zeros(p),
    };
    let (mut f, mut prob) = objective(&z, &t, &lambda);
    let mut trace = vec![f];
    let mut violation = f64::INFINITY;

    for iter in 0..=opts.max_iter {
        let zbar = z.tr_mul(&prob);
        let grad = &zbar - &t;
        violation = grad.amax();
        if violation <= opts.tol {
            let values: Vec<f64> = prob.iter().map(|q| q * n as f64).collect();
            let ws = WeightSet {
                values: super::normalize(values)?,
                method: WeightMethod::Entropy,
                converged: true,
                iterations: iter,
                dual_or_coef: (0..p).map(|j| lambda[j] / sd[j]).collect(),
                objective_trace: trace,
                columns: (0..p).collect(),
            };
            debug_assert!((ws.mean() - 1.0).abs() <= MEAN_ONE_TOL);
            return Ok(ws);
        }
        if iter == opts.max_iter {
            break;
        }

        let mut hess = DMatrix::zeros(p, p);
        for i in 0..n {
            let d = z.row(i).transpose() - &zbar;
            hess.ger(prob[i], &d, &d, 1.0);
        }
        let Some(dir) = linalg::solve_spd(&hess, &grad) else { break };
        let dir = -dir;
        let slope = grad.dot(&dir);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &lambda + &dir * step;
            let (fc, pc) = objective(&z, &t, &cand);
            let armijo = fc <= f + 1e-4 * step * slope;
            // Near the optimum the decrease falls below rounding; accept a full
            // step that does not raise the objective beyond it.
            let flat = step == 1.0 && fc - f <= 1e-14 * f.abs().max(1.0);
            if fc.is_finite() && (armijo || flat) {
                lambda = cand;
                f = fc.min(f);
                prob = pc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(f);
    }

    Err(Error::NonConvergence {
        method: "entropy balancing",
        iterations: trace.len() - 1,
        last_violation: violation,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_means_give_uniform_weights() {
        let x = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 6.0]);
        let w = entropy_balance(&x, &[3.0]).unwrap();
        assert!(w.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(w.iterations, 0);
    }

    #[test]
    fn binary_covariate_closed_form() {
        // Solving mean(w)=1 and mean(w x)=0.75 with w constant within x-cells
        // gives w(1) = 0.75 / 0.5 = 1.5 and w(0) = 0.25 / 0.5 = 0.5.
        let x = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
        let w = entropy_balance(&x, &[0.75]).unwrap();
        for (v, expect) in w.values.iter().zip([1.5, 1.5, 0.5, 0.5]) {
            assert!((v - expect).abs() < 1e-10, "{v}");
        }
        assert!((w.dual_or_coef[0] - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn infeasible_target_fails() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        match entropy_balance(&x, &[5.0]) {
            Err(Error::NonConvergence { trace, .. }) => {
                assert!(trace.windows(2).all(|p| p[1] <= p[0]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collinear_design_names_column() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 5.0, 10.0]);
        assert!(matches!(entropy_balance(&x, &[2.0, 4.0]), Err(Error::RankDeficient(c)) if c == ["column 1"]));
    }
}
