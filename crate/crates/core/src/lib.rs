//! Weighted finite element pricing for the SABR model and its CEV limit.
//!
//! The pricing equation `u_t = A u` for the SABR generator in log-volatility
//! coordinates is posed in the weighted space `L²(x^{μ/2})`, discretized by
//! tensor-product piecewise-linear elements and integrated with a θ-scheme.
//!
//! ```no_run
//! use sabr_fem::{price_european, DiscretizationSpec, Payoff, SabrParams, ThetaConfig};
//!
//! let p = SabrParams::new(0.5, -0.3, 1.0, 1.0, 0.2)?;
//! let spec = DiscretizationSpec::for_pricing(&p, 10.0, 1.0, 6, 6)?;
//! let theta = ThetaConfig::new(0.5, 10.0, 200)?;
//! let put = price_european(&p, &Payoff::Put { strike: 1.0 }, &spec, &theta)?;
//! println!("{}", put.point_price()?);
//! # Ok::<(), sabr_fem::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod assembly;
pub mod error;
pub mod model;
pub mod multiresolution;
pub mod oracles;
pub mod pricing;
pub mod quadrature;
pub mod sparse;
pub mod timestepper;

pub use assembly::{assemble_mass, assemble_operator, assemble_stiffness, assemble_vnorm_gram, TensorOperator};
pub use error::{Error, Result};
pub use model::{
    mu_range, operator_coefficients, validate_params, wellposedness_constants, CoefficientSet, SabrParams,
    WeightExponent, WellPosednessCert,
};
pub use multiresolution::{build_mesh, Basis1D, Boundary, DyadicMesh};
pub use pricing::{
    mass_at_zero, price_barrier, price_european, project_payoff, BoundaryFlags, DiscretizationSpec, MassAtZero,
    Payoff, PriceSurface,
};
pub use sparse::{BandedLu, CsrMatrix};
pub use timestepper::{build_stepper, run_theta_scheme, stability_report, Record, StabilityReport, Stepper, ThetaConfig, Trajectory};
