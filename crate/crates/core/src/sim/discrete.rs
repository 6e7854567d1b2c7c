//! Exact enumeration of a binary-X, binary-U super-population.
//!
//! Every expectation is a finite sum over four cells, so the bias identities can
//! be checked to rounding error instead of Monte Carlo error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensitivity::bias;

/// Joint cell probabilities indexed `[x][u]` in the sample (`q1`) and target
/// (`q0`) groups, with a deterministic individual effect per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    pub q1: [[f64; 2]; 2],
    pub q0: [[f64; 2]; 2],
    pub tau: [[f64; 2]; 2],
    /// A τ-model that depends on X only.
    pub tau_hat: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteIdentity {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl DiscreteIdentity {
    pub fn error(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

const CELLS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

impl DiscreteModel {
    /// Pooled cell masses `pxu` and membership `P(S=1 | x, u) = logistic(a + bx·x + bu·u)`.
    pub fn from_logistic(pxu: [[f64; 2]; 2], a: f64, bx: f64, bu: f64, tau: [[f64; 2]; 2], tau_hat: [f64; 2]) -> Result<Self> {
        let mut q1 = [[0.0; 2]; 2];
        let mut q0 = [[0.0; 2]; 2];
        for (x, u) in CELLS {
            let pi = super::logistic(a + bx * x as f64 + bu * u as f64);
            q1[x][u] = pxu[x][u] * pi;
            q0[x][u] = pxu[x][u] * (1.0 - pi);
        }
        let (s1, s0) = (total(&q1), total(&q0));
        for (x, u) in CELLS {
            q1[x][u] /= s1;
            q0[x][u] /= s0;
        }
        let m = Self { q1, q0, tau, tau_hat };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for q in [&self.q1, &self.q0] {
            if CELLS.iter().any(|&(x, u)| !(q[x][u] > 0.0)) || (total(q) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("cell probabilities must be positive and sum to one".into()));
            }
        }
        Ok(())
    }

    pub fn ideal_weight(&self, x: usize, u: usize) -> f64 {
        self.q0[x][u] / self.q1[x][u]
    }

    pub fn x_weight(&self, x: usize) -> f64 {
        (self.q0[x][0] + self.q0[x][1]) / (self.q1[x][0] + self.q1[x][1])
    }

    fn e1(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        CELLS.iter().map(|&(x, u)| self.q1[x][u] * f(x, u)).sum()
    }

    fn e0(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        CELLS.iter().map(|&(x, u)| self.q0[x][u] * f(x, u)).sum()
    }

    fn cov1(&self, f: impl Fn(usize, usize) -> f64 + Copy, g: impl Fn(usize, usize) -> f64 + Copy) -> f64 {
        self.e1(|x, u| f(x, u) * g(x, u)) - self.e1(f) * self.e1(g)
    }

    /// Evaluates each identity on the enumerated population.
    pub fn identities(&self) -> Vec<DiscreteIdentity> {
        let ws = |x: usize, u: usize| self.ideal_weight(x, u);
        let w = |x: usize, _u: usize| self.x_weight(x);
        let eps = |x: usize, u: usize| self.x_weight(x) - self.ideal_weight(x, u);
        let tau = |x: usize, u: usize| self.tau[x][u];
        let th = |x: usize, _u: usize| self.tau_hat[x];
        let xi = |x: usize, u: usize| self.tau[x][u] - self.tau_hat[x];
        let id = |name: &str, lhs: f64, rhs: f64| DiscreteIdentity { name: name.to_string(), lhs, rhs };

        let mut pointwise = 0.0f64;
        for (x, u) in CELLS {
            let p1 = self.q1[x][u] / (self.q1[x][0] + self.q1[x][1]);
            let p0 = self.q0[x][u] / (self.q0[x][0] + self.q0[x][1]);
            pointwise = pointwise.max((eps(x, u) - self.x_weight(x) * (p1 - p0) / p1).abs());
        }

        let (var_ws, var_w, var_eps) = (self.cov1(ws, ws), self.cov1(w, w), self.cov1(eps, eps));
        let var_tau = self.cov1(tau, tau);
        let r2 = var_eps / var_ws;
        let pate = self.e0(tau);
        let bias_w = self.e1(|x, u| w(x, u) * tau(x, u)) - pate;
        let rho = self.cov1(eps, tau) / (var_eps * var_tau).sqrt();
        let c = self.cov1(w, tau) / (var_w * var_tau).sqrt();
        let c_star = self.cov1(ws, tau) / (var_ws * var_tau).sqrt();

        let var_xi = self.cov1(xi, xi);
        let bias_aug = bias_w - self.e1(|x, u| w(x, u) * th(x, u)) + self.e0(th);
        let rho_xi = self.cov1(eps, xi) / (var_eps * var_xi).sqrt();

        vec![
            id("weight_error_pointwise", pointwise, 0.0),
            id("ideal_weights_mean_one", self.e1(ws), 1.0),
            id("x_weights_mean_one", self.e1(w), 1.0),
            id("variance_decomposition", var_ws, var_w + var_eps),
            id("error_orthogonality", self.cov1(w, eps), 0.0),
            id("ideal_weights_unbiased", self.e1(|x, u| ws(x, u) * tau(x, u)), pate),
            id("bias_monte_carlo", bias_w, bias(r2, rho, var_tau, var_w)),
            id("correlation_decomposition", c_star, c * (1.0 - r2).sqrt() - rho * r2.sqrt()),
            id("augmented_bias_monte_carlo", bias_aug, bias(r2, rho_xi, var_xi, var_w)),
            id("x_conditional_mean", self.e1(|x, u| if x == 1 { ws(x, u) } else { 0.0 }) / self.e1(|x, _| x as f64), self.x_weight(1)),
        ]
    }

    /// `(bias of the X-adjusted estimator, cov_S(ξ, w*))` for the linear effect
    /// `τ = a + bx·x + bu·u` with the τ-model fit in the sample group.
    pub fn linear_equivalence(&self, a: f64, bx: f64, bu: f64) -> (f64, f64) {
        let m = Self {
            tau: [[a, a + bu], [a + bx, a + bx + bu]],
            tau_hat: [a + bu * self.e1(|_, u| u as f64), a + bx + bu * self.e1(|_, u| u as f64)],
            ..self.clone()
        };
        let w = |x: usize| m.x_weight(x);
        let adjusted = m.e1(|x, u| w(x) * (m.tau[x][u] - m.tau_hat[x])) + m.e0(|x, _| m.tau_hat[x]);
        let cov = m.e1(|x, u| (m.tau[x][u] - m.tau_hat[x]) * m.ideal_weight(x, u));
        (adjusted - m.e0(|x, u| m.tau[x][u]), cov)
    }
}

fn total(q: &[[f64; 2]; 2]) -> f64 {
    q[0][0] + q[0][1] + q[1][0] + q[1][1]
}

/// Independent X and U within each group, as the linear equivalence requires.
pub fn independent(px1: f64, pu1: f64, px0: f64, pu0: f64) -> Result<DiscreteModel> {
    let prod = |px: f64, pu: f64| [[(1.0 - px) * (1.0 - pu), (1.0 - px) * pu], [px * (1.0 - pu), px * pu]];
    let m = DiscreteModel { q1: prod(px1, pu1), q0: prod(px0, pu0), tau: [[0.0; 2]; 2], tau_hat: [0.0; 2] };
    m.validate()?;
    Ok(m)
}
