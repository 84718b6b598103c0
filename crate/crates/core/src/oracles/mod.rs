//! Independent reference prices and convergence-rate studies.

pub mod black_scholes;
pub mod cev;
pub mod mc;
pub mod studies;

pub use black_scholes::black_scholes_price;
pub use cev::{cev_exact_price, noncentral_chi2_cdf};
pub use mc::{mc_absorption_probability, mc_price, mc_price_barrier, McConfig, McEstimate};
pub use studies::{
    fit_rate, projection_rate_study, spatial_convergence_study, temporal_convergence_study, ConvergenceReport,
    ConvergenceRow,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// Standard normal distribution function.
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
