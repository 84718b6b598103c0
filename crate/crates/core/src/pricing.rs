//! Option prices as solutions of the truncated, weighted pricing problem.
//!
//! The spot axis is `[0, R_x]` with `u = 0` at `R_x` (a knock-out barrier).
//! At `x = 0` the price of an absorbed path is `u0(0)`; this value is carried
//! by the lift `ℓ(x) = u0(0)(1 − x/R_x)`, which the generator annihilates, and
//! the remaining part is solved with a vanishing trace at the origin.

use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_mass, assemble_stiffness, VolAxis};
use crate::error::{Error, Result};
use crate::model::{validate_params, SabrParams, WeightExponent};
use crate::multiresolution::{build_mesh, project, Basis1D, Boundary};
use crate::timestepper::{build_stepper, Record, ThetaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFlags {
    pub x_left: Boundary,
    pub x_right: Boundary,
    pub y_low: Boundary,
    pub y_high: Boundary,
}

impl BoundaryFlags {
    /// Every boundary node removed.
    pub const ALL_ESSENTIAL: Self = Self {
        x_left: Boundary::EssentialZero,
        x_right: Boundary::EssentialZero,
        y_low: Boundary::EssentialZero,
        y_high: Boundary::EssentialZero,
    };

    /// Pricing default: knock-out at `R_x` and at the top of the volatility
    /// range, natural condition at the bottom, lifted trace at `x = 0`.
    pub const PRICING: Self = Self {
        x_left: Boundary::EssentialZero,
        x_right: Boundary::EssentialZero,
        y_low: Boundary::Free,
        y_high: Boundary::EssentialZero,
    };
}

/// Truncated domain `[0, R_x] × [y_c − R_y, y_c + R_y]` and its refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub r_x: f64,
    pub y_center: f64,
    pub r_y: f64,
    pub l_x: u32,
    pub l_y: u32,
    pub base_x: usize,
    pub base_y: usize,
    pub mu: WeightExponent,
    pub bc: BoundaryFlags,
}

impl DiscretizationSpec {
    /// Default truncation for pricing at `params` up to `horizon`.
    ///
    /// `scale` is the largest payoff feature (strike, ε). The spot range is
    /// `4·max(x0, scale, 1)`, doubled when `ν√T > 1`; the log-vol range is
    /// centred at `ln y0` with half-width `max(3, 3ν√T)`.
    pub fn for_pricing(params: &SabrParams, horizon: f64, scale: f64, l_x: u32, l_y: u32) -> Result<Self> {
        validate_params(params)?;
        let spread = params.nu * horizon.sqrt();
        let base = params.x0.max(scale).max(1.0);
        let r_x = if spread > 1.0 { 8.0 * base } else { 4.0 * base };
        Ok(Self {
            r_x,
            y_center: params.log_y0(),
            r_y: (3.0 * spread).max(3.0),
            l_x,
            l_y,
            base_x: 1,
            base_y: 1,
            mu: WeightExponent::auto(params.beta)?,
            bc: BoundaryFlags::PRICING,
        })
    }

    pub fn with_levels(self, l_x: u32, l_y: u32) -> Self {
        Self { l_x, l_y, ..self }
    }

    pub fn y_interval(&self) -> (f64, f64) {
        (self.y_center - self.r_y, self.y_center + self.r_y)
    }

    pub fn x_basis(&self) -> Result<Basis1D> {
        if !(self.r_x > 0.0) {
            return Err(Error::validation("R_x", format!("{} must be positive", self.r_x)));
        }
        Ok(Basis1D::new(build_mesh((0.0, self.r_x), self.l_x, self.base_x)?, self.bc.x_left, self.bc.x_right))
    }

    /// The volatility axis, collapsed to a single point when `ν = 0`.
    pub fn vol_axis(&self, params: &SabrParams) -> Result<VolAxis> {
        if params.is_cev() {
            return Ok(VolAxis::Frozen { y: params.log_y0() });
        }
        if !(self.r_y > 0.0) {
            return Err(Error::validation("R_y", format!("{} must be positive", self.r_y)));
        }
        let mesh = build_mesh(self.y_interval(), self.l_y, self.base_y)?;
        Ok(VolAxis::Fem(Basis1D::new(mesh, self.bc.y_low, self.bc.y_high)))
    }

    pub fn n_dofs(&self, params: &SabrParams) -> Result<usize> {
        Ok(self.x_basis()?.n_dofs() * self.vol_axis(params)?.n_dofs())
    }

    /// Rejects specs whose domain misses `(x0, ln y0)`; warns when the point
    /// is within 10% of a truncation boundary.
    pub fn check_interior(&self, params: &SabrParams) -> Result<()> {
        let x0 = params.x0;
        if !(x0 < self.r_x) {
            return Err(Error::OutOfDomain { point: x0, lo: 0.0, hi: self.r_x });
        }
        if x0 > 0.9 * self.r_x {
            warn!("x0 = {x0} lies within 10% of R_x = {}; localization error may dominate", self.r_x);
        }
        if !params.is_cev() {
            let (lo, hi) = self.y_interval();
            let y = params.log_y0();
            if !(y > lo && y < hi) {
                return Err(Error::OutOfDomain { point: y, lo, hi });
            }
            if (y - self.y_center).abs() > 0.9 * self.r_y {
                warn!("ln y0 = {y} lies within 10% of the log-vol truncation");
            }
        }
        Ok(())
    }
}

/// User-supplied payoff with its kink locations.
#[derive(Clone)]
pub struct CustomPayoff {
    pub label: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for CustomPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPayoff").field("label", &self.label).field("breakpoints", &self.breakpoints).finish()
    }
}

/// Terminal payoff as a function of the forward only.
#[derive(Debug, Clone)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    /// `max(1 − x/ε, 0)`, which tends to the indicator of `{x = 0}`.
    MassZeroPut { eps: f64 },
    Identity,
    Custom(CustomPayoff),
}

impl Payoff {
    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static, breakpoints: Vec<f64>) -> Self {
        Payoff::Custom(CustomPayoff { label: label.into(), f: Arc::new(f), breakpoints })
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (x - strike).max(0.0),
            Payoff::Put { strike } => (strike - x).max(0.0),
            Payoff::MassZeroPut { eps } => (1.0 - x / eps).max(0.0),
            Payoff::Identity => x,
            Payoff::Custom(c) => (c.f)(x),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Payoff::Call { strike } | Payoff::Put { strike } => vec![*strike],
            Payoff::MassZeroPut { eps } => vec![*eps],
            Payoff::Identity => vec![],
            Payoff::Custom(c) => c.breakpoints.clone(),
        }
    }

    /// Largest payoff feature, used to size the default domain.
    pub fn scale(&self) -> f64 {
        self.breakpoints().into_iter().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, v: f64| Err(Error::validation(field, format!("{v} must be positive and finite")));
        match *self {
            Payoff::Call { strike } | Payoff::Put { strike } if !(strike > 0.0 && strike.is_finite()) => {
                bad("strike", strike)
            }
            Payoff::MassZeroPut { eps } if !(eps > 0.0 && eps.is_finite()) => bad("eps", eps),
            _ => Ok(()),
        }
    }
}

/// Projected initial data.
#[derive(Debug, Clone)]
pub struct InitialData {
    /// Tensor coefficients of `P(u0 − ℓ)`, x-major.
    pub coeffs: Vec<f64>,
    /// `u0(0)` carried by the lift (zero when the origin node is free).
    pub lift: f64,
    /// `‖(u0 − ℓ) − P_x(u0 − ℓ)‖ / ‖u0‖` in `L²(x^μ)` along the spot axis.
    pub projection_error: f64,
    /// `|u0(R_x)| / ‖u0‖`: what the knock-out boundary cuts off.
    pub clipping: f64,
}

fn lift_value(payoff: &Payoff, spec: &DiscretizationSpec) -> f64 {
    if spec.bc.x_left == Boundary::EssentialZero {
        payoff.value(0.0)
    } else {
        0.0
    }
}

/// `∫_0^{R} x^μ g(x)² dx` split at the mesh nodes and the given breakpoints.
fn weighted_l2_sq(g: &impl Fn(f64) -> f64, basis: &Basis1D, mu: f64, breaks: &[f64]) -> f64 {
    let mesh = &basis.mesh;
    let mut cuts = mesh.nodes();
    cuts.extend(breaks.iter().copied().filter(|&b| b > mesh.a && b < mesh.b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| crate::multiresolution::weighted_integral(w[0], w[1], mu, 12, &|x| g(x).powi(2)))
        .sum()
}

/// Weighted L² projection of the (lifted) payoff, constant in `y`.
pub fn project_payoff(payoff: &Payoff, spec: &DiscretizationSpec, params: &SabrParams) -> Result<InitialData> {
    payoff.validate()?;
    let xb = spec.x_basis()?;
    let mu = spec.mu.value();
    let lift = lift_value(payoff, spec);
    let r = spec.r_x;
    let target = |x: f64| payoff.value(x) - lift * (1.0 - x / r);
    let breaks = payoff.breakpoints();
    let px = project(target, &xb, mu, &breaks)?;

    let py = match spec.vol_axis(params)? {
        VolAxis::Fem(yb) => project(|_| 1.0, &yb, 0.0, &[])?,
        VolAxis::Frozen { .. } => vec![1.0],
    };
    let mut coeffs = Vec::with_capacity(px.len() * py.len());
    for cx in &px {
        coeffs.extend(py.iter().map(|cy| cx * cy));
    }

    let norm_u0 = weighted_l2_sq(&|x| payoff.value(x), &xb, mu, &breaks).sqrt();
    let full = xb.expand(&px);
    let mesh = xb.mesh;
    let residual = |x: f64| {
        let c = mesh.locate(x).unwrap_or(0);
        let (x0, x1) = (mesh.node(c), mesh.node(c + 1));
        let t = (x - x0) / (x1 - x0);
        target(x) - (full[c] * (1.0 - t) + full[c + 1] * t)
    };
    let err = weighted_l2_sq(&residual, &xb, mu, &breaks).sqrt();
    let denom = if norm_u0 > 0.0 { norm_u0 } else { 1.0 };
    let edge = if spec.bc.x_right == Boundary::EssentialZero { payoff.value(r).abs() } else { 0.0 };
    Ok(InitialData { coeffs, lift, projection_error: err / denom, clipping: edge / denom })
}

/// Final state of a pricing run with evaluation helpers.
#[derive(Debug, Clone)]
pub struct PriceSurface {
    pub params: SabrParams,
    pub spec: DiscretizationSpec,
    pub horizon: f64,
    pub coeffs: Vec<f64>,
    pub lift: f64,
    x_basis: Basis1D,
    vol_axis: VolAxis,
}

impl PriceSurface {
    pub fn x_basis(&self) -> &Basis1D {
        &self.x_basis
    }

    pub fn vol_axis(&self) -> &VolAxis {
        &self.vol_axis
    }

    /// Piecewise-bilinear interpolation of the solution at `(x, y)`.
    pub fn value_at(&self, x: f64, y: f64) -> Result<f64> {
        let w = tensor_evaluate(&self.x_basis, &self.vol_axis, &self.coeffs, x, y)?;
        Ok(w + self.lift * (1.0 - x / self.spec.r_x))
    }

    /// Price at today's state `(x0, ln y0)`.
    pub fn point_price(&self) -> Result<f64> {
        self.value_at(self.params.x0, self.params.log_y0())
    }

    /// `(x, y, value)` on every mesh node, x-major.
    pub fn grid(&self) -> Result<Vec<(f64, f64, f64)>> {
        let ys = match &self.vol_axis {
            VolAxis::Fem(b) => b.mesh.nodes(),
            VolAxis::Frozen { y } => vec![*y],
        };
        let mut out = Vec::with_capacity(self.x_basis.mesh.n_nodes() * ys.len());
        for x in self.x_basis.mesh.nodes() {
            for &y in &ys {
                out.push((x, y, self.value_at(x, y)?));
            }
        }
        Ok(out)
    }
}

/// Evaluates a tensor coefficient vector (x-major) at one point.
pub fn tensor_evaluate(xb: &Basis1D, ya: &VolAxis, coeffs: &[f64], x: f64, y: f64) -> Result<f64> {
    let ny = ya.n_dofs();
    if coeffs.len() != xb.n_dofs() * ny {
        return Err(Error::LengthMismatch { expected: xb.n_dofs() * ny, actual: coeffs.len() });
    }
    let mesh = &xb.mesh;
    let c = mesh.locate(x)?;
    let (x0, x1) = (mesh.node(c), mesh.node(c + 1));
    let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
    let mut total = 0.0;
    for (node, wx) in [(c, 1.0 - t), (c + 1, t)] {
        if wx == 0.0 {
            continue;
        }
        if let Some(ix) = xb.node_dof(node) {
            total += wx * ya.evaluate(&coeffs[ix * ny..(ix + 1) * ny], y)?;
        }
    }
    Ok(total)
}

fn solve_surface(
    params: &SabrParams,
    payoff: &Payoff,
    spec: &DiscretizationSpec,
    theta: &ThetaConfig,
) -> Result<PriceSurface> {
    validate_params(params)?;
    WeightExponent::new(spec.mu.value(), params.beta)?;
    spec.check_interior(params)?;
    let init = project_payoff(payoff, spec, params)?;
    if init.clipping > 1e-8 {
        warn!("payoff is clipped at R_x = {} (relative size {:.3e}); pricing a knock-out", spec.r_x, init.clipping);
    }
    let mass = assemble_mass(params, spec)?;
    let stiffness = assemble_stiffness(params, spec)?;
    let stepper = build_stepper(&mass, &stiffness, *theta)?;
    let traj = stepper.run(&init.coeffs, None, Record::Endpoints)?;
    Ok(PriceSurface {
        params: *params,
        spec: *spec,
        horizon: theta.horizon,
        coeffs: traj.last().to_vec(),
        lift: init.lift,
        x_basis: spec.x_basis()?,
        vol_axis: spec.vol_axis(params)?,
    })
}

/// European price surface after time-to-maturity `theta.horizon`.
pub fn price_european(
    params: &SabrParams,
    payoff: &Payoff,
    spec: &DiscretizationSpec,
    theta: &ThetaConfig,
) -> Result<PriceSurface> {
    solve_surface(params, payoff, spec, theta)
}

/// Up-and-out price with barrier `barrier`, monitored continuously.
///
/// The spot axis is cut at the mesh node nearest to the barrier, keeping the
/// cell width of `spec`.
pub fn price_barrier(
    params: &SabrParams,
    payoff: &Payoff,
    spec: &DiscretizationSpec,
    theta: &ThetaConfig,
    barrier: f64,
) -> Result<PriceSurface> {
    if !(barrier > params.x0) {
        return Err(Error::validation("barrier", format!("{barrier} must exceed x0 = {}", params.x0)));
    }
    let h = spec.x_basis()?.mesh.h();
    let j = (barrier / h).round().max(1.0) as usize;
    let snapped = j as f64 * h;
    if (snapped - barrier).abs() > 1e-12 * barrier {
        warn!("barrier {barrier} is not a mesh node; snapped to {snapped}");
    }
    if !(snapped > params.x0) {
        return Err(Error::validation("barrier", format!("snapped barrier {snapped} does not exceed x0")));
    }
    let level = j.trailing_zeros().min(spec.l_x);
    let cut = DiscretizationSpec {
        r_x: snapped,
        l_x: level,
        base_x: j >> level,
        bc: BoundaryFlags { x_right: Boundary::EssentialZero, ..spec.bc },
        ..*spec
    };
    solve_surface(params, payoff, &cut, theta)
}

/// Mass-at-zero estimates from puts `max(1 − x/ε, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassAtZero {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    /// Value at the smallest ε.
    pub estimate: f64,
}

pub fn mass_at_zero(
    params: &SabrParams,
    spec: &DiscretizationSpec,
    theta: &ThetaConfig,
    eps_sequence: &[f64],
) -> Result<MassAtZero> {
    if eps_sequence.is_empty() {
        return Err(Error::validation("eps", "empty sequence"));
    }
    if eps_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation("eps", "sequence must be strictly decreasing"));
    }
    if params.beta >= 1.0 {
        return Ok(MassAtZero { eps: eps_sequence.to_vec(), values: vec![0.0; eps_sequence.len()], estimate: 0.0 });
    }
    let h = spec.x_basis()?.mesh.h();
    let mut values = Vec::with_capacity(eps_sequence.len());
    for &eps in eps_sequence {
        if eps < 0.5 * h {
            warn!("eps = {eps} is below half the first cell width {h}; the indicator is under-resolved");
        }
        let s = price_european(params, &Payoff::MassZeroPut { eps }, spec, theta)?;
        values.push(s.point_price()?);
    }
    let estimate = *values.last().expect("nonempty sequence");
    Ok(MassAtZero { eps: eps_sequence.to_vec(), values, estimate })
}
