//! SABR model parameters, weight exponent admissibility and the analytic
//! constants (continuity / Gårding) of the weighted pricing form.
//!
//! In log-volatility coordinates the model reads
//!
//! ```text
//! dX = X^β e^Y dW,    dY = ν dZ − ν²/2 dt,    d<W, Z> = ρ dt
//! ```
//!
//! with absorption at `X = 0`. Setting `ν = 0` recovers the CEV model with
//! constant volatility `y0`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters `(β, ρ, ν, x0, y0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    /// CEV exponent, `0 ≤ β ≤ 1`.
    pub beta: f64,
    /// Spot/vol correlation, `|ρ| ≤ 1`.
    pub rho: f64,
    /// Vol-of-vol, `ν ≥ 0`.
    pub nu: f64,
    /// Initial forward, `x0 > 0`.
    pub x0: f64,
    /// Initial volatility, `y0 > 0`.
    pub y0: f64,
}

impl SabrParams {
    /// Builds a parameter set, checking field ranges and well-posedness.
    pub fn new(beta: f64, rho: f64, nu: f64, x0: f64, y0: f64) -> Result<Self> {
        let p = Self { beta, rho, nu, x0, y0 };
        validate_params(&p)?;
        Ok(p)
    }

    /// CEV model `dX = σ X^β dW`, i.e. SABR with `ν = ρ = 0` and `y0 = σ`.
    pub fn cev(beta: f64, sigma: f64, x0: f64) -> Result<Self> {
        Self::new(beta, 0.0, 0.0, x0, sigma)
    }

    /// `|ρ| ν²`, which must stay below 2.
    pub fn wellposedness_product(&self) -> f64 {
        self.rho.abs() * self.nu * self.nu
    }

    /// True when the volatility is frozen and the problem is univariate.
    pub fn is_cev(&self) -> bool {
        self.nu == 0.0
    }

    pub fn log_y0(&self) -> f64 {
        self.y0.ln()
    }
}

fn check_range(field: &'static str, value: f64, ok: bool, expected: &str) -> Result<()> {
    if !value.is_finite() || !ok {
        return Err(Error::validation(field, format!("{value} is outside {expected}")));
    }
    Ok(())
}

/// Accepts a parameter set iff every field is in range and `|ρ|ν² < 2`.
pub fn validate_params(p: &SabrParams) -> Result<()> {
    check_range("beta", p.beta, (0.0..=1.0).contains(&p.beta), "[0, 1]")?;
    check_range("rho", p.rho, (-1.0..=1.0).contains(&p.rho), "[-1, 1]")?;
    check_range("nu", p.nu, p.nu >= 0.0, "[0, inf)")?;
    check_range("x0", p.x0, p.x0 > 0.0, "(0, inf)")?;
    check_range("y0", p.y0, p.y0 > 0.0, "(0, inf)")?;
    let product = p.wellposedness_product();
    if product >= 2.0 {
        return Err(Error::IllPosed { product });
    }
    Ok(())
}

/// Closed interval of admissible weight exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuRange {
    pub lo: f64,
    pub hi: f64,
}

impl MuRange {
    pub fn contains(&self, mu: f64) -> bool {
        // tolerate round-off at the endpoints, e.g. 1 - 2*0.55
        let tol = 1e-12;
        mu >= self.lo - tol && mu <= self.hi + tol
    }
}

/// Admissible interval for `μ` and the default choice `μ = −β` (`0` for `β = 1`).
pub fn mu_range(beta: f64) -> Result<(MuRange, f64)> {
    check_range("beta", beta, (0.0..=1.0).contains(&beta), "[0, 1]")?;
    if beta < 0.5 {
        Ok((MuRange { lo: -2.0 * beta, hi: 0.0 }, -beta))
    } else if beta < 1.0 {
        Ok((MuRange { lo: -1.0, hi: 1.0 - 2.0 * beta }, -beta))
    } else {
        Ok((MuRange { lo: 0.0, hi: 0.0 }, 0.0))
    }
}

/// Exponent `μ` of the spatial weight `x^μ`, checked against `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightExponent(f64);

impl WeightExponent {
    pub fn new(mu: f64, beta: f64) -> Result<Self> {
        let (range, _) = mu_range(beta)?;
        if !mu.is_finite() || !range.contains(mu) {
            return Err(Error::validation(
                "mu",
                format!("{mu} is outside the admissible range [{}, {}] for beta = {beta}", range.lo, range.hi),
            ));
        }
        Ok(Self(mu.clamp(range.lo, range.hi)))
    }

    /// The default `μ = −β` (`μ = 0` when `β = 1`).
    pub fn auto(beta: f64) -> Result<Self> {
        let (_, mu) = mu_range(beta)?;
        Ok(Self(mu))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Auxiliary and resulting constants of the continuity and Gårding estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPosednessCert {
    pub delta: f64,
    pub epsilon: f64,
    /// Continuity constant.
    pub c1: f64,
    /// Coercivity constant of the Gårding inequality.
    pub c2: f64,
    /// Shift of the Gårding inequality.
    pub c3: f64,
}

/// Open interval `(|ρ|ν³/2, 2/(|ρ|ν))` that `δ` must lie in when `ρν ≠ 0`.
pub fn delta_interval(rho: f64, nu: f64) -> Option<(f64, f64)> {
    let r = rho.abs();
    if r * nu == 0.0 {
        return None;
    }
    Some((r * nu.powi(3) / 2.0, 2.0 / (r * nu)))
}

/// Continuity and Gårding constants for the weighted form with exponent `mu`.
///
/// `δ` is the geometric midpoint of its admissible interval and `ε` half of
/// its upper bound `2/(ν³|ρ|) − 1/δ`. When `ρν = 0` both are unconstrained
/// and set to 1. In the CEV case (`ν = 0`) the volatility gradient is absent
/// from the energy norm, so `C2` reduces to the `∂x` coefficient `1/2`.
pub fn wellposedness_constants(p: &SabrParams, mu: WeightExponent) -> Result<WellPosednessCert> {
    validate_params(p)?;
    let (beta, nu) = (p.beta, p.nu);
    let r = p.rho.abs();
    let rn3 = r * nu.powi(3);

    let (delta, epsilon) = match delta_interval(p.rho, nu) {
        Some((lo, hi)) => {
            let delta = (lo * hi).sqrt();
            let eps_hi = 2.0 / rn3 - 1.0 / delta;
            (delta, 0.5 * eps_hi)
        }
        None => (1.0, 1.0),
    };

    let c2 = if p.is_cev() {
        0.5
    } else {
        let vol_part = nu * nu / 2.0 - rn3 * delta / 4.0;
        let spot_part = 0.5 - rn3 / (4.0 * delta) - rn3 * epsilon / 4.0;
        vol_part.min(spot_part)
    };
    let c3 = c2 + if rn3 > 0.0 { rn3 / (4.0 * epsilon) } else { 0.0 };

    let mut s = 2.0 * beta + mu.value();
    if (s - 1.0).abs() < 1e-12 {
        warn!("2*beta + mu = 1 makes the Hardy constant blow up; perturbing mu by -1e-6 for C1");
        s -= 1e-6;
    }
    let rho_nu = (p.rho * nu).abs();
    let c1 = 0.5 + s / (s - 1.0).abs() + 2.0 * rho_nu * (nu * nu / 2.0).max(1.0) + nu * nu;

    Ok(WellPosednessCert { delta, epsilon, c1, c2, c3 })
}

/// Coefficients of the six Kronecker terms of the stiffness matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub qxx: f64,
    pub qxy: f64,
    pub qyy: f64,
    pub cx1: f64,
    pub cx2: f64,
    pub cy: f64,
}

pub fn operator_coefficients(p: &SabrParams, mu: WeightExponent) -> CoefficientSet {
    let rho_nu = p.rho * p.nu;
    let half_nu2 = 0.5 * p.nu * p.nu;
    CoefficientSet {
        qxx: 0.5,
        qxy: rho_nu,
        qyy: half_nu2,
        cx1: (2.0 * p.beta + mu.value()) / 2.0,
        cx2: rho_nu,
        cy: half_nu2,
    }
}
