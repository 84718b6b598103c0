//! Exact prices for the CEV model `dX = σ X^β dW` absorbed at zero.

use log::warn;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::black_scholes::black_scholes_price;
use super::{norm_cdf, norm_pdf, OptionKind};

/// Truncation tolerance on the neglected Poisson weight.
pub const SERIES_TOL: f64 = 1e-12;
pub const SERIES_CAP: usize = 100_000;

/// Noncentral χ² distribution function with `k` degrees of freedom and
/// noncentrality `lambda`, as a Poisson mixture of central χ² laws summed
/// outward from the Poisson mode.
pub fn noncentral_chi2_cdf(x: f64, k: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if lambda <= 0.0 {
        return gamma_lr(0.5 * k, 0.5 * x);
    }
    let half = 0.5 * lambda;
    let weight = |j: usize| (-half + j as f64 * half.ln() - ln_gamma(j as f64 + 1.0)).exp();
    let term = |j: usize| weight(j) * gamma_lr(0.5 * k + j as f64, 0.5 * x);
    let mode = half.floor() as usize;

    let mut total = term(mode);
    let mut used = 1usize;
    // upward: weights decay with ratio half/(j+1) once past the mode
    let mut j = mode + 1;
    while used < SERIES_CAP {
        let w = weight(j);
        let ratio = half / (j as f64 + 1.0);
        total += w * gamma_lr(0.5 * k + j as f64, 0.5 * x);
        used += 1;
        if ratio < 1.0 && w / (1.0 - ratio) < SERIES_TOL {
            break;
        }
        j += 1;
    }
    // downward: ratio j/half below the mode
    let mut j = mode;
    while j > 0 && used < SERIES_CAP {
        j -= 1;
        let w = weight(j);
        total += w * gamma_lr(0.5 * k + j as f64, 0.5 * x);
        used += 1;
        let ratio = j as f64 / half;
        if ratio < 1.0 && w / (1.0 - ratio) < SERIES_TOL {
            break;
        }
    }
    if used >= SERIES_CAP {
        warn!("noncentral chi-squared series hit the {SERIES_CAP}-term cap (lambda = {lambda})");
    }
    total.clamp(0.0, 1.0)
}

/// Arithmetic Brownian motion `x0 + σW` absorbed at zero.
fn absorbed_bachelier_put(sigma: f64, x0: f64, strike: f64, horizon: f64) -> f64 {
    let s = sigma * horizon.sqrt();
    // image method: density φ_s(y − x0) − φ_s(y + x0) on (0, ∞) plus an atom at 0
    let g = |m: f64| {
        (strike - m) * (norm_cdf((strike - m) / s) - norm_cdf(-m / s)) + s * (norm_pdf((strike - m) / s) - norm_pdf(-m / s))
    };
    strike * 2.0 * norm_cdf(-x0 / s) + g(x0) - g(-x0)
}

/// Exact CEV price with zero rates and absorption at the origin.
///
/// `β = 1` is the lognormal case and `β = 0` absorbed arithmetic Brownian
/// motion; in between the transition law is noncentral χ².
pub fn cev_exact_price(sigma: f64, beta: f64, x0: f64, strike: f64, horizon: f64, kind: OptionKind) -> f64 {
    assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
    let var = sigma * sigma * horizon;
    let put = if var <= 1e-300 {
        (strike - x0).max(0.0)
    } else if beta == 1.0 {
        return black_scholes_price(sigma, x0, strike, horizon, kind);
    } else if beta == 0.0 {
        absorbed_bachelier_put(sigma, x0, strike, horizon)
    } else {
        let q = 1.0 - beta;
        let denom = q * q * var;
        let a = strike.powf(2.0 * q) / denom;
        let b = 1.0 / q;
        let c = x0.powf(2.0 * q) / denom;
        strike * (1.0 - noncentral_chi2_cdf(c, b, a)) - x0 * noncentral_chi2_cdf(a, b + 2.0, c)
    };
    match kind {
        OptionKind::Put => put,
        // absorbed CEV is a true martingale for β < 1
        OptionKind::Call => put + x0 - strike,
    }
}
