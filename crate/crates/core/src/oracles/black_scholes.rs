use super::{norm_cdf, OptionKind};

/// Lognormal price with zero rates.
pub fn black_scholes_price(sigma: f64, x0: f64, strike: f64, horizon: f64, kind: OptionKind) -> f64 {
    let sd = sigma * horizon.sqrt();
    let put = if sd <= 0.0 {
        (strike - x0).max(0.0)
    } else {
        let d1 = ((x0 / strike).ln() + 0.5 * sd * sd) / sd;
        let d2 = d1 - sd;
        strike * norm_cdf(-d2) - x0 * norm_cdf(-d1)
    };
    match kind {
        OptionKind::Put => put,
        OptionKind::Call => put + x0 - strike,
    }
}
