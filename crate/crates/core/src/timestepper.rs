//! θ-scheme for `M u' + A u = g` and the discrete stability estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{BandedLu, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaConfig {
    pub theta: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub steps: usize,
}

impl ThetaConfig {
    pub fn new(theta: f64, horizon: f64, steps: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::validation("theta", format!("{theta} is outside [0, 1]")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::validation("T", format!("{horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::validation("M_steps", "at least one step is required"));
        }
        Ok(Self { theta, horizon, steps })
    }

    pub fn k(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t^m = m k`, with `t^M = T` exactly.
    pub fn time(&self, m: usize) -> f64 {
        if m == self.steps {
            self.horizon
        } else {
            m as f64 * self.k()
        }
    }
}

/// Fills the load vector `g(t)` in place.
pub type Forcing = dyn Fn(f64, &mut [f64]);

/// Factorized `(M/k + θA)` together with the explicit part `(M/k − (1−θ)A)`.
#[derive(Debug, Clone)]
pub struct Stepper {
    config: ThetaConfig,
    lhs: BandedLu,
    rhs: CsrMatrix,
}

pub fn build_stepper(mass: &CsrMatrix, stiffness: &CsrMatrix, config: ThetaConfig) -> Result<Stepper> {
    if mass.nrows() != stiffness.nrows() || mass.ncols() != stiffness.ncols() || mass.nrows() != mass.ncols() {
        return Err(Error::LengthMismatch { expected: mass.nrows(), actual: stiffness.nrows() });
    }
    let inv_k = 1.0 / config.k();
    let lhs = CsrMatrix::linear_combination(&[(inv_k, mass), (config.theta, stiffness)]);
    let rhs = CsrMatrix::linear_combination(&[(inv_k, mass), (config.theta - 1.0, stiffness)]);
    Ok(Stepper { config, lhs: BandedLu::factor(&lhs)?, rhs })
}

/// Which states a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Record {
    All,
    Endpoints,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Step indices of the stored states.
    pub steps: Vec<usize>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("a trajectory holds at least u0")
    }
}

impl Stepper {
    pub fn config(&self) -> &ThetaConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.lhs.dim()
    }

    /// Advances `u` by one step with the combined load `g^{m+θ}` (if any).
    pub fn step(&self, u: &[f64], load: Option<&[f64]>) -> Vec<f64> {
        let mut b = self.rhs.mul_vec(u);
        if let Some(g) = load {
            b.iter_mut().zip(g).for_each(|(bi, gi)| *bi += gi);
        }
        self.lhs.solve_in_place(&mut b);
        b
    }

    /// Runs all steps. `forcing(t, out)` writes `g(t)`; `None` means `g = 0`.
    pub fn run(
        &self,
        u0: &[f64],
        forcing: Option<&Forcing>,
        record: Record,
    ) -> Result<Trajectory> {
        let n = self.dim();
        if u0.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: u0.len() });
        }
        let cfg = self.config;
        let mut traj = Trajectory { steps: vec![0], states: vec![u0.to_vec()] };
        let mut u = u0.to_vec();
        let (mut g_now, mut g_next, mut g_mix) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        if let Some(f) = forcing {
            f(cfg.time(0), &mut g_now);
        }
        for m in 0..cfg.steps {
            let load = if let Some(f) = forcing {
                f(cfg.time(m + 1), &mut g_next);
                for i in 0..n {
                    g_mix[i] = cfg.theta * g_next[i] + (1.0 - cfg.theta) * g_now[i];
                }
                std::mem::swap(&mut g_now, &mut g_next);
                Some(g_mix.as_slice())
            } else {
                None
            };
            u = self.step(&u, load);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: m + 1 });
            }
            if record == Record::All || m + 1 == cfg.steps {
                traj.steps.push(m + 1);
                traj.states.push(u.clone());
            }
        }
        Ok(traj)
    }
}

/// Convenience wrapper: build and run in one call.
pub fn run_theta_scheme(
    stepper: &Stepper,
    u0: &[f64],
    forcing: Option<&Forcing>,
) -> Result<Trajectory> {
    stepper.run(u0, forcing, Record::All)
}

/// Outcome of checking
/// `‖u^M‖² + c1 k Σ‖u^{m+θ}‖²_a ≤ ‖u⁰‖² + c2 k Σ‖g^{m+θ}‖²_*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`, nonnegative when the estimate holds.
    pub margin: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Verifies the θ ≥ 1/2 stability estimate on a full trajectory.
///
/// `‖·‖` is the `M`-norm, `‖v‖²_a = vᵀ sym(A) v` and `‖g‖_* = (gᵀ sym(A)⁻¹ g)^{1/2}`
/// is the discrete dual norm (the supremum of `gᵀv / ‖v‖_a`). The constants
/// are `c1 ∈ (0, 2)` and `c2 = 1/(2 − c1)`. `loads` holds `g^{m+θ}` per step
/// or is empty for `g = 0`.
pub fn stability_report(
    trajectory: &Trajectory,
    config: &ThetaConfig,
    mass: &CsrMatrix,
    stiffness: &CsrMatrix,
    loads: &[Vec<f64>],
    c1: f64,
) -> Result<StabilityReport> {
    if config.theta < 0.5 {
        return Err(Error::Unsupported(format!(
            "theta = {} < 1/2 needs lambda_A = sup |v|_H^2 / |v|_*^2 and a step-size bound; not provided",
            config.theta
        )));
    }
    if !(c1 > 0.0 && c1 < 2.0) {
        return Err(Error::validation("c1", format!("{c1} is outside (0, 2)")));
    }
    if trajectory.steps.len() != config.steps + 1 {
        return Err(Error::LengthMismatch { expected: config.steps + 1, actual: trajectory.steps.len() });
    }
    if !loads.is_empty() && loads.len() != config.steps {
        return Err(Error::LengthMismatch { expected: config.steps, actual: loads.len() });
    }
    let c2 = 1.0 / (2.0 - c1);
    let k = config.k();
    let theta = config.theta;
    let sym = stiffness.symmetric_part();
    let sym_lu = BandedLu::factor(&sym)?;

    let mut energy_sum = 0.0;
    for w in trajectory.states.windows(2) {
        let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        let e = sym.bilinear(&mid, &mid);
        if e < 0.0 {
            return Err(Error::Unsupported(
                "sym(A) is indefinite on this trajectory; the energy estimate needs a shifted problem".into(),
            ));
        }
        energy_sum += e;
    }
    let dual_sum: f64 = loads.iter().map(|g| g.iter().zip(sym_lu.solve(g)).map(|(a, b)| a * b).sum::<f64>()).sum();

    let norm2 = |u: &[f64]| mass.bilinear(u, u);
    let lhs = norm2(trajectory.last()) + c1 * k * energy_sum;
    let rhs = norm2(trajectory.initial()) + c2 * k * dual_sum;
    let slack = 1e-10 * rhs.abs().max(f64::MIN_POSITIVE);
    Ok(StabilityReport { holds: lhs <= rhs + slack, lhs, rhs, margin: rhs - lhs, c1, c2 })
}
