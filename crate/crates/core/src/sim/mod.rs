//! Synthetic populations with a known omitted confounder.
//!
//! The default family is a Gaussian shift model. Let `Z = (X, U)` with
//! `X ~ N(0, I_p)` and `U = cᵀX + sqrt(1 − |c|²) V` in the target population,
//! so `Z ~ N(0, Σ)`. Sample units follow `N(Σγ, Σ)`. In the pooled data the
//! log-odds of membership is then exactly `α + γᵀz`, the X-only log-odds is also
//! linear, and every moment the oracle needs has a closed form:
//!
//! - ideal weights `w*(z) = exp(−γᵀz + γᵀΣγ/2)`,
//! - X-only weights `w(x) = exp(−μₓᵀx + |μₓ|²/2)` with `μₓ = γₓ + c γᵤ`,
//! - `U | X` is Gaussian in both groups with variance `1 − |c|²`.
//!
//! Outcomes are linear per arm with independent Gaussian noise.

pub mod discrete;
mod oracle;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use oracle::{oracle_verify, CheckKind, OracleCheck, OracleReport};

use crate::data::{ExperimentalSample, KeyValues, TargetPopulation};
use crate::error::{Error, Result};
use crate::estimators::replicate_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub pop_n: usize,
    pub gamma_x: Vec<f64>,
    pub gamma_u: f64,
    /// Covariance of U with each standardized X.
    pub u_cov: Vec<f64>,
    pub a1: f64,
    pub a0: f64,
    pub beta1_x: Vec<f64>,
    pub beta0_x: Vec<f64>,
    pub beta1_u: f64,
    pub beta0_u: f64,
    pub sigma1: f64,
    pub sigma0: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            pop_n: 10_000,
            gamma_x: vec![0.3, -0.2, 0.1],
            gamma_u: 0.4,
            u_cov: vec![0.3, 0.0, 0.2],
            a1: 1.0,
            a0: 0.0,
            beta1_x: vec![1.0, 0.5, -0.5],
            beta0_x: vec![0.5, 0.5, 0.0],
            beta1_u: 1.5,
            beta0_u: 0.5,
            sigma1: 1.0,
            sigma0: 1.0,
            seed: 20240101,
        }
    }
}

/// Smallest selection probability allowed anywhere within 4 sd of the index.
pub const POSITIVITY_DELTA: f64 = 0.01;

impl DgpConfig {
    pub fn p(&self) -> usize {
        self.gamma_x.len()
    }

    /// Reads DGP keys from a key=value file; absent keys keep their defaults.
    pub fn take_from(kv: &mut KeyValues) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            n: kv.take("n")?.unwrap_or(d.n),
            pop_n: kv.take("pop_n")?.unwrap_or(d.pop_n),
            gamma_x: kv.take_list("gamma_x")?.unwrap_or(d.gamma_x),
            gamma_u: kv.take("gamma_u")?.unwrap_or(d.gamma_u),
            u_cov: kv.take_list("u_cov")?.unwrap_or(d.u_cov),
            a1: kv.take("a1")?.unwrap_or(d.a1),
            a0: kv.take("a0")?.unwrap_or(d.a0),
            beta1_x: kv.take_list("beta1_x")?.unwrap_or(d.beta1_x),
            beta0_x: kv.take_list("beta0_x")?.unwrap_or(d.beta0_x),
            beta1_u: kv.take("beta1_u")?.unwrap_or(d.beta1_u),
            beta0_u: kv.take("beta0_u")?.unwrap_or(d.beta0_u),
            sigma1: kv.take("sigma1")?.unwrap_or(d.sigma1),
            sigma0: kv.take("sigma0")?.unwrap_or(d.sigma0),
            seed: kv.take("seed")?.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::InvalidParameter("need at least one observed covariate".into()));
        }
        for (name, len) in [("u_cov", self.u_cov.len()), ("beta1_x", self.beta1_x.len()), ("beta0_x", self.beta0_x.len())] {
            if len != p {
                return Err(Error::InvalidParameter(format!("{name} has {len} entries, gamma_x has {p}")));
            }
        }
        if self.n < 4 || self.pop_n < 2 {
            return Err(Error::InvalidParameter("need n >= 4 and pop_n >= 2".into()));
        }
        if self.c2() >= 1.0 {
            return Err(Error::InvalidParameter("|u_cov|² must be below 1".into()));
        }
        if self.sigma1 < 0.0 || self.sigma0 < 0.0 {
            return Err(Error::InvalidParameter("noise scales must be nonnegative".into()));
        }
        let s = self.s();
        let sd = s.sqrt();
        let alpha = self.alpha();
        let lo = logistic(alpha - 4.0 * sd);
        let hi = logistic(alpha + s + 4.0 * sd);
        if lo <= POSITIVITY_DELTA {
            return Err(Error::Positivity(lo));
        }
        if hi >= 1.0 - POSITIVITY_DELTA {
            return Err(Error::Positivity(hi));
        }
        Ok(())
    }

    fn c2(&self) -> f64 {
        self.u_cov.iter().map(|c| c * c).sum()
    }

    /// `γᵀΣγ`.
    pub fn s(&self) -> f64 {
        let gx2: f64 = self.gamma_x.iter().map(|g| g * g).sum();
        let cg: f64 = self.u_cov.iter().zip(&self.gamma_x).map(|(c, g)| c * g).sum();
        gx2 + self.gamma_u * self.gamma_u + 2.0 * self.gamma_u * cg
    }

    /// Intercept of the pooled selection model `P(S=1 | z) = logistic(α + γᵀz)`.
    pub fn alpha(&self) -> f64 {
        (self.n as f64 / self.pop_n as f64).ln() - 0.5 * self.s()
    }

    /// Sample-group mean of X: `γₓ + c γᵤ`.
    pub fn mu_x(&self) -> Vec<f64> {
        self.gamma_x.iter().zip(&self.u_cov).map(|(g, c)| g + c * self.gamma_u).collect()
    }

    /// Sample-group mean of U: `cᵀγₓ + γᵤ`.
    pub fn mu_u(&self) -> f64 {
        self.u_cov.iter().zip(&self.gamma_x).map(|(c, g)| c * g).sum::<f64>() + self.gamma_u
    }

    pub fn pate(&self) -> f64 {
        self.a1 - self.a0
    }

    pub fn ideal_weight(&self, x: &[f64], u: f64) -> f64 {
        let gz: f64 = self.gamma_x.iter().zip(x).map(|(g, v)| g * v).sum::<f64>() + self.gamma_u * u;
        (-gz + 0.5 * self.s()).exp()
    }

    /// Density ratio of X between target and sample: `E_S[w* | X = x]`.
    pub fn x_weight(&self, x: &[f64]) -> f64 {
        let mu = self.mu_x();
        let mx: f64 = mu.iter().zip(x).map(|(m, v)| m * v).sum();
        let m2: f64 = mu.iter().map(|m| m * m).sum();
        (-mx + 0.5 * m2).exp()
    }

    /// Conditional mean of U given X in the sample and in the target.
    pub fn u_given_x_means(&self, x: &[f64]) -> (f64, f64) {
        let mu = self.mu_x();
        let target: f64 = self.u_cov.iter().zip(x).map(|(c, v)| c * v).sum();
        let shift: f64 = self.u_cov.iter().zip(&mu).map(|(c, m)| c * m).sum();
        (self.mu_u() + target - shift, target)
    }

    pub fn u_given_x_sd(&self) -> f64 {
        (1.0 - self.c2()).sqrt()
    }

    pub fn true_propensity(&self, x: &[f64], u: f64) -> f64 {
        let gz: f64 = self.gamma_x.iter().zip(x).map(|(g, v)| g * v).sum::<f64>() + self.gamma_u * u;
        logistic(self.alpha() + gz)
    }

    pub fn potential_outcomes(&self, x: &[f64], u: f64, e1: f64, e0: f64) -> (f64, f64) {
        let lin = |a: f64, b: &[f64], bu: f64| a + b.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + bu * u;
        (lin(self.a1, &self.beta1_x, self.beta1_u) + self.sigma1 * e1, lin(self.a0, &self.beta0_x, self.beta0_u) + self.sigma0 * e0)
    }
}

pub fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// One draw of the experiment, with the latent quantities exposed.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sample: ExperimentalSample,
    pub population: TargetPopulation,
    /// `P(S = 1 | X, U)` for each sample unit under the pooled model.
    pub true_propensities: Vec<f64>,
    pub true_tau: Vec<f64>,
    pub u_sample: Vec<f64>,
    pub u_population: Vec<f64>,
    pub ideal_weights: Vec<f64>,
    pub x_weights: Vec<f64>,
}

fn draw_z(cfg: &DgpConfig, rng: &mut ChaCha8Rng, rows: usize, shifted: bool) -> (DMatrix<f64>, Vec<f64>) {
    let p = cfg.p();
    let (mu_x, mu_u) = if shifted { (cfg.mu_x(), cfg.mu_u()) } else { (vec![0.0; p], 0.0) };
    let sd_u = cfg.u_given_x_sd();
    let mut x = DMatrix::zeros(rows, p);
    let mut u = Vec::with_capacity(rows);
    for i in 0..rows {
        let mut resid = 0.0;
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            x[(i, j)] = mu_x[j] + e;
            resid += cfg.u_cov[j] * e;
        }
        let v: f64 = rng.sample(StandardNormal);
        u.push(mu_u + resid + sd_u * v);
    }
    (x, u)
}

pub fn generate_with(cfg: &DgpConfig, rng: &mut ChaCha8Rng) -> Result<Generated> {
    let p = cfg.p();
    let (xs, us) = draw_z(cfg, rng, cfg.n, true);
    let (xp, up) = draw_z(cfg, rng, cfg.pop_n, false);
    let mut treatment = vec![false; cfg.n];
    treatment[..cfg.n / 2].fill(true);
    treatment.shuffle(rng);

    let mut outcome = Vec::with_capacity(cfg.n);
    let mut tau = Vec::with_capacity(cfg.n);
    let mut props = Vec::with_capacity(cfg.n);
    let mut ideal = Vec::with_capacity(cfg.n);
    let mut xw = Vec::with_capacity(cfg.n);
    let mut row = vec![0.0; p];
    for i in 0..cfg.n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = xs[(i, j)];
        }
        let e1: f64 = rng.sample(StandardNormal);
        let e0: f64 = rng.sample(StandardNormal);
        let (y1, y0) = cfg.potential_outcomes(&row, us[i], e1, e0);
        outcome.push(if treatment[i] { y1 } else { y0 });
        tau.push(y1 - y0);
        props.push(cfg.true_propensity(&row, us[i]));
        ideal.push(cfg.ideal_weight(&row, us[i]));
        xw.push(cfg.x_weight(&row));
    }
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    Ok(Generated {
        sample: ExperimentalSample::new(xs, treatment, outcome, names.clone())?,
        population: TargetPopulation::new(xp, names)?,
        true_propensities: props,
        true_tau: tau,
        u_sample: us,
        u_population: up,
        ideal_weights: ideal,
        x_weights: xw,
    })
}

/// Draws stream 0 of the configured seed.
pub fn generate(cfg: &DgpConfig) -> Result<Generated> {
    cfg.validate()?;
    generate_with(cfg, &mut replicate_rng(cfg.seed, 0))
}
