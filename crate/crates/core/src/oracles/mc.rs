//! Monte Carlo for the SABR model with exact log-normal volatility and an
//! Euler step in the forward, absorbed permanently at zero.
//!
//! Path `i` draws from ChaCha8 seeded with `seed` on stream `i`, so results do
//! not depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_params, SabrParams};
use crate::pricing::Payoff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

impl McEstimate {
    /// `|value − mean|` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        (value - self.mean).abs() / self.stderr
    }
}

#[derive(Debug, Clone, Copy)]
struct PathEnd {
    x: f64,
    knocked: bool,
}

fn simulate_path(p: &SabrParams, horizon: f64, cfg: &McConfig, path: usize, barrier: Option<f64>) -> PathEnd {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path as u64);
    let dt = horizon / cfg.n_steps as f64;
    let sq = dt.sqrt();
    let rho_bar = (1.0 - p.rho * p.rho).max(0.0).sqrt();
    let drift = -0.5 * p.nu * p.nu * dt;
    let (mut x, mut y) = (p.x0, p.y0);
    for _ in 0..cfg.n_steps {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let dw = sq * (p.rho * z1 + rho_bar * z2);
        x += x.powf(p.beta) * y * dw;
        if x <= 0.0 {
            return PathEnd { x: 0.0, knocked: false };
        }
        if barrier.is_some_and(|b| x >= b) {
            return PathEnd { x, knocked: true };
        }
        y *= (p.nu * sq * z1 + drift).exp();
    }
    PathEnd { x, knocked: false }
}

fn estimate(
    p: &SabrParams,
    horizon: f64,
    cfg: &McConfig,
    barrier: Option<f64>,
    f: impl Fn(PathEnd) -> f64 + Sync,
) -> Result<McEstimate> {
    validate_params(p)?;
    if cfg.n_paths == 0 || cfg.n_steps == 0 {
        return Err(Error::validation("mc", "n_paths and n_steps must be positive"));
    }
    if !(horizon > 0.0) {
        return Err(Error::validation("T", format!("{horizon} must be positive")));
    }
    // indexed collect keeps the summation order fixed
    let values: Vec<f64> =
        (0..cfg.n_paths).into_par_iter().map(|i| f(simulate_path(p, horizon, cfg, i, barrier))).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate { mean, stderr: (var / n).sqrt() })
}

/// Discounted-free expectation of `payoff(X_T)`; absorbed paths pay `payoff(0)`.
pub fn mc_price(p: &SabrParams, payoff: &Payoff, horizon: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(p, horizon, cfg, None, |end| payoff.value(end.x))
}

/// Up-and-out price, monitored at every Euler step.
pub fn mc_price_barrier(
    p: &SabrParams,
    payoff: &Payoff,
    horizon: f64,
    barrier: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    estimate(p, horizon, cfg, Some(barrier), |end| if end.knocked { 0.0 } else { payoff.value(end.x) })
}

/// Frequency of absorption by time `horizon`, an estimate of `P(X_T = 0)`.
pub fn mc_absorption_probability(p: &SabrParams, horizon: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(p, horizon, cfg, None, |end| if end.x == 0.0 { 1.0 } else { 0.0 })
}
