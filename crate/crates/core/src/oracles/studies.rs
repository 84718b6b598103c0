//! Measured convergence rates in space, time and for the projection.

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_mass, assemble_vnorm_gram, VolAxis};
use crate::error::{Error, Result};
use crate::model::SabrParams;
use crate::multiresolution::{build_mesh, project, weighted_integral, Basis1D, Boundary};
use crate::pricing::{price_european, DiscretizationSpec, Payoff, PriceSurface};
use crate::timestepper::ThetaConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// Refinement level, or the step count for temporal studies.
    pub level_or_k: f64,
    pub error_h: f64,
    pub error_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted rate of the H-norm error; `None` if an error vanished.
    pub slope_h: Option<f64>,
    pub slope_energy: Option<f64>,
    pub reference: String,
    /// False when an error failed to decrease between consecutive rows.
    pub monotone: bool,
}

impl ConvergenceReport {
    fn from_rows(rows: Vec<ConvergenceRow>, abscissa: impl Fn(f64) -> f64, reference: String) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::validation("levels", format!("a rate fit needs at least 3 points, got {}", rows.len())));
        }
        let pts = |e: fn(&ConvergenceRow) -> f64| rows.iter().map(|r| (abscissa(r.level_or_k), e(r))).collect::<Vec<_>>();
        let slope_h = fit_rate(&pts(|r| r.error_h));
        let slope_energy = fit_rate(&pts(|r| r.error_energy));
        let monotone = rows.windows(2).all(|w| w[1].error_h <= w[0].error_h && w[1].error_energy <= w[0].error_energy);
        if !monotone {
            log::warn!("non-monotone error sequence in convergence study ({reference})");
        }
        Ok(Self { rows, slope_h, slope_energy, reference, monotone })
    }
}

/// Least-squares slope of `−log₂(error)` against the abscissa, dropping the
/// coarsest point when at least three remain.
pub fn fit_rate(points: &[(f64, f64)]) -> Option<f64> {
    let pts = if points.len() > 3 { &points[1..] } else { points };
    if pts.len() < 2 || pts.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| -p.1.log2()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (-p.1.log2() - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Embeds a level-`(l_x, l_y)` tensor vector into the finer levels.
fn prolongate_tensor(xb: &Basis1D, ya: &VolAxis, coeffs: &[f64], target_x: u32, target_y: u32) -> Result<Vec<f64>> {
    let (nx, ny) = (xb.n_dofs(), ya.n_dofs());
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(nx);
    for ix in 0..nx {
        let row = &coeffs[ix * ny..(ix + 1) * ny];
        cols.push(match ya {
            VolAxis::Fem(yb) => yb.prolongate_to(row, target_y)?,
            VolAxis::Frozen { .. } => row.to_vec(),
        });
    }
    let ny_f = cols[0].len();
    let mut out_cols: Vec<Vec<f64>> = Vec::with_capacity(ny_f);
    for iy in 0..ny_f {
        let line: Vec<f64> = cols.iter().map(|c| c[iy]).collect();
        out_cols.push(xb.prolongate_to(&line, target_x)?);
    }
    let nx_f = out_cols[0].len();
    let mut out = vec![0.0; nx_f * ny_f];
    for (iy, line) in out_cols.iter().enumerate() {
        for (ix, v) in line.iter().enumerate() {
            out[ix * ny_f + iy] = *v;
        }
    }
    Ok(out)
}

fn norm(m: &crate::sparse::CsrMatrix, e: &[f64]) -> f64 {
    m.bilinear(e, e).max(0.0).sqrt()
}

/// Spatial errors at time `T` against a reference two levels finer.
///
/// All levels refine both axes together and use the same time steps, so the
/// temporal error is common to every run and the reference. Errors are the
/// `M`-norm (discrete H) and the `G`-norm (energy) of the prolongated
/// difference on the reference mesh.
pub fn spatial_convergence_study(
    params: &SabrParams,
    payoff: &Payoff,
    spec: &DiscretizationSpec,
    levels: &[u32],
    theta: &ThetaConfig,
) -> Result<ConvergenceReport> {
    if levels.windows(2).any(|w| w[1] <= w[0]) || levels.is_empty() {
        return Err(Error::validation("levels", "must be nonempty and strictly increasing"));
    }
    let top = *levels.last().expect("nonempty") + 2;
    let ref_spec = spec.with_levels(top, top);
    let reference = price_european(params, payoff, &ref_spec, theta)?;
    let mass = assemble_mass(params, &ref_spec)?;
    let gram = assemble_vnorm_gram(params, &ref_spec)?;

    let solutions: Vec<Result<PriceSurface>> =
        levels.par_iter().map(|&l| price_european(params, payoff, &spec.with_levels(l, l), theta)).collect();
    let mut rows = Vec::with_capacity(levels.len());
    for (&l, sol) in levels.iter().zip(solutions) {
        let sol = sol?;
        let fine = prolongate_tensor(sol.x_basis(), sol.vol_axis(), &sol.coeffs, top, top)?;
        let e: Vec<f64> = fine.iter().zip(&reference.coeffs).map(|(a, b)| a - b).collect();
        rows.push(ConvergenceRow { level_or_k: l as f64, error_h: norm(&mass, &e), error_energy: norm(&gram, &e) });
    }
    ConvergenceReport::from_rows(rows, |l| l, format!("level {top} solution, {} steps", theta.steps))
}

/// Temporal errors at time `T` on the fixed mesh of `spec`.
///
/// `steps` lists step counts (`k = T/steps`). The reference is the Richardson
/// extrapolation of runs with `8·max` and `16·max` steps at the nominal
/// order of the scheme.
pub fn temporal_convergence_study(
    params: &SabrParams,
    payoff: &Payoff,
    spec: &DiscretizationSpec,
    steps: &[usize],
    theta: f64,
    horizon: f64,
) -> Result<ConvergenceReport> {
    if steps.windows(2).any(|w| w[1] <= w[0]) || steps.is_empty() {
        return Err(Error::validation("steps", "must be nonempty and strictly increasing"));
    }
    let order = if (theta - 0.5).abs() < 1e-12 { 2 } else { 1 };
    let finest = *steps.last().expect("nonempty");
    let run = |m: usize| -> Result<Vec<f64>> {
        let cfg = ThetaConfig::new(theta, horizon, m)?;
        Ok(price_european(params, payoff, spec, &cfg)?.coeffs)
    };
    let coarse_ref = run(8 * finest)?;
    let fine_ref = run(16 * finest)?;
    let factor = (1u64 << order) as f64 - 1.0;
    let reference: Vec<f64> = fine_ref.iter().zip(&coarse_ref).map(|(f, c)| f + (f - c) / factor).collect();
    let mass = assemble_mass(params, spec)?;
    let gram = assemble_vnorm_gram(params, spec)?;

    let mut rows = Vec::with_capacity(steps.len());
    for &m in steps {
        let u = run(m)?;
        let e: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
        rows.push(ConvergenceRow { level_or_k: m as f64, error_h: norm(&mass, &e), error_energy: norm(&gram, &e) });
    }
    ConvergenceReport::from_rows(
        rows,
        f64::log2,
        format!("Richardson extrapolation (order {order}) of {} and {} steps", 8 * finest, 16 * finest),
    )
}

/// Projection errors of `f` on `[0, 1]` with weight `x^μ`.
///
/// `error_h` is `‖f − P_L f‖` in `L²(x^{μ/2})`, `error_energy` the weighted
/// `H¹` norm `(∫ x^μ (e² + e'²))^{1/2}`.
pub fn projection_rate_study(
    mu: f64,
    f: impl Fn(f64) -> f64 + Sync,
    df: impl Fn(f64) -> f64 + Sync,
    levels: &[u32],
) -> Result<ConvergenceReport> {
    let rows: Vec<Result<ConvergenceRow>> = levels
        .par_iter()
        .map(|&l| {
            let basis = Basis1D::new(build_mesh((0.0, 1.0), l, 1)?, Boundary::Free, Boundary::Free);
            let c = basis.expand(&project(&f, &basis, mu, &[])?);
            let mesh = basis.mesh;
            let (mut e0, mut e1) = (0.0, 0.0);
            for cell in 0..mesh.n_cells() {
                let (x0, x1) = (mesh.node(cell), mesh.node(cell + 1));
                let h = x1 - x0;
                let slope = (c[cell + 1] - c[cell]) / h;
                let err = |x: f64| f(x) - (c[cell] + slope * (x - x0));
                let derr = |x: f64| df(x) - slope;
                e0 += weighted_integral(x0, x1, mu, 12, &|x| err(x).powi(2));
                e1 += weighted_integral(x0, x1, mu, 12, &|x| derr(x).powi(2));
            }
            Ok(ConvergenceRow { level_or_k: l as f64, error_h: e0.sqrt(), error_energy: (e0 + e1).sqrt() })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    ConvergenceReport::from_rows(rows, |l| l, "exact function, 12-point Gauss per cell".into())
}
