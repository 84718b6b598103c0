//! Gauss–Jacobi rules from the Golub–Welsch eigenproblem.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::{gamma, ln_gamma};

/// Nodes and weights of an `n`-point rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Rule exact for `∫_{-1}^{1} (1-t)^alpha (1+t)^beta p(t) dt`, `deg p ≤ 2n-1`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> GaussRule {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    assert!(alpha > -1.0 && beta > -1.0, "Jacobi exponents must exceed -1");
    let ab = alpha + beta;

    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        jac[(i, i)] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        if i + 1 < n {
            let m = k + 1.0;
            let b2 = if i == 0 {
                // n = 1 entry after cancelling the (n + α + β) factor
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                let d = 2.0 * m + ab;
                4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (d * d * (d + 1.0) * (d - 1.0))
            };
            jac[(i, i + 1)] = b2.sqrt();
            jac[(i + 1, i)] = b2.sqrt();
        }
    }

    let mu0 = if ab + 2.0 < 150.0 {
        2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0)
    } else {
        ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0) - ln_gamma(ab + 2.0)).exp()
    };

    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

pub fn gauss_legendre(n: usize) -> GaussRule {
    gauss_jacobi(n, 0.0, 0.0)
}

type RuleKey = (usize, u64, u64);

/// Memoized [`gauss_jacobi`]; assembly asks for the same few rules many times.
pub fn cached_jacobi(n: usize, alpha: f64, beta: f64) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    let key = (n, alpha.to_bits(), beta.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&key) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(gauss_jacobi(n, alpha, beta));
    cache.lock().expect("rule cache poisoned").insert(key, Arc::clone(&rule));
    rule
}

pub fn cached_legendre(n: usize) -> Arc<GaussRule> {
    cached_jacobi(n, 0.0, 0.0)
}

impl GaussRule {
    /// `∫_a^b f(x) dx` with the rule mapped affinely.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        r * self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(c + r * t)).sum::<f64>()
    }

    /// For a rule built with `alpha = 0, beta = a`: `∫_0^h x^a f(x) dx`.
    pub fn integrate_power_left(&self, h: f64, a: f64, f: impl Fn(f64) -> f64) -> f64 {
        // x = h (1+t)/2 maps (1+t)^a to (2x/h)^a
        let scale = (h / 2.0).powf(a + 1.0);
        scale
            * self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&t, &w)| w * f(0.5 * h * (1.0 + t)))
                .sum::<f64>()
    }
}
