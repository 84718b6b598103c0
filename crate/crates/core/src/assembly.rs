//! Weighted 1D building blocks and the Kronecker assembly of the bivariate
//! mass, stiffness and V-norm Gram matrices.
//!
//! Unknowns are numbered x-major: global index `ix * n_y + iy`. One-dimensional
//! matrices store `entries[(i, j)] = ∫ ω D^{s_trial} φ_j D^{s_test} φ_i`, so in a
//! convection block `B` the derivative sits on the trial (column) function.

use crate::error::{Error, Result};
use crate::model::{operator_coefficients, validate_params, SabrParams, WeightExponent};
use crate::multiresolution::Basis1D;
use crate::pricing::DiscretizationSpec;
use crate::quadrature::cached_legendre;
use crate::sparse::CsrMatrix;

/// Weight family of a 1D block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    /// `x^a` on an interval inside `[0, ∞)`.
    Power(f64),
    /// `e^{c y}`.
    Exponential(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `∫ ω φ_j φ_i`
    Mass,
    /// `∫ ω φ_j' φ_i'`
    Stiffness,
    /// `∫ ω φ_j' φ_i`
    Convection,
}

/// One of the two local shape functions on a cell, or its derivative.
/// `node = 0` is the hat falling from the left end, `node = 1` the rising one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalFn {
    pub node: u8,
    pub derivative: bool,
}

impl LocalFn {
    pub const fn value(node: u8) -> Self {
        Self { node, derivative: false }
    }

    pub const fn slope(node: u8) -> Self {
        Self { node, derivative: true }
    }

    /// Coefficients `(c0, c1)` of the function as `c0 + c1 x` on `[x0, x1]`.
    fn monomials(self, x0: f64, x1: f64) -> (f64, f64) {
        let h = x1 - x0;
        match (self.node, self.derivative) {
            (0, false) => (x1 / h, -1.0 / h),
            (_, false) => (-x0 / h, 1.0 / h),
            (0, true) => (-1.0 / h, 0.0),
            (_, true) => (1.0 / h, 0.0),
        }
    }

    /// Coefficients in the reference variable `t = (x - x0)/h`.
    fn reference(self, h: f64) -> (f64, f64) {
        match (self.node, self.derivative) {
            (0, false) => (1.0, -1.0),
            (_, false) => (0.0, 1.0),
            (0, true) => (-1.0 / h, 0.0),
            (_, true) => (1.0 / h, 0.0),
        }
    }

    fn eval(self, x0: f64, x1: f64, x: f64) -> f64 {
        let h = x1 - x0;
        match (self.node, self.derivative) {
            (0, false) => (x1 - x) / h,
            (_, false) => (x - x0) / h,
            (0, true) => -1.0 / h,
            (_, true) => 1.0 / h,
        }
    }
}

fn product(p: (f64, f64), q: (f64, f64)) -> [f64; 3] {
    [p.0 * q.0, p.0 * q.1 + p.1 * q.0, p.1 * q.1]
}

const CELL_POINTS: usize = 16;

/// `∫_{x0}^{x1} x^a · p(x) · q(x) dx` for local shape functions `p`, `q`.
///
/// Cells touching the origin are integrated with the monomial antiderivative
/// `x^{a+k+1}/(a+k+1)`; a nonzero monomial with `a + k + 1 ≤ 0` is a genuine
/// divergence. Elsewhere `x^a` is smooth and a 16-point Gauss rule is exact
/// to rounding (exact outright for integer `a`).
pub fn weighted_moment(cell: (f64, f64), p: LocalFn, q: LocalFn, a: f64) -> Result<f64> {
    let (x0, x1) = cell;
    if x0 < 0.0 && a != 0.0 {
        return Err(Error::validation("cell", format!("power weight on [{x0}, {x1}] crosses the origin")));
    }
    if x0 == 0.0 && a != 0.0 {
        let c = product(p.monomials(x0, x1), q.monomials(x0, x1));
        let mut total = 0.0;
        for (k, &ck) in c.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            let e = a + k as f64 + 1.0;
            if e <= 0.0 {
                return Err(Error::SingularIntegral { x0, x1, exponent: a + k as f64 });
            }
            total += ck * x1.powf(e) / e;
        }
        return Ok(total);
    }
    let rule = cached_legendre(CELL_POINTS);
    Ok(rule.integrate(x0, x1, |x| {
        let w = if a == 0.0 { 1.0 } else { x.powf(a) };
        w * p.eval(x0, x1, x) * q.eval(x0, x1, x)
    }))
}

/// `∫_0^1 t^n e^{z t} dt` for `n = 0, 1, 2`.
fn exp_moments(z: f64) -> [f64; 3] {
    if z.abs() < 1.0 {
        let mut out = [0.0; 3];
        for (n, slot) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut j = 0usize;
            loop {
                let contrib = term / (n + j + 1) as f64;
                *slot += contrib;
                if contrib.abs() < 1e-17 * slot.abs() {
                    break;
                }
                j += 1;
                term *= z / j as f64;
            }
        }
        out
    } else {
        let ez = z.exp();
        let e0 = (ez - 1.0) / z;
        let e1 = (ez - e0) / z;
        let e2 = (ez - 2.0 * e1) / z;
        [e0, e1, e2]
    }
}

/// `∫_{y0}^{y1} e^{c y} · p(y) · q(y) dy` in closed form.
pub fn exponential_moment(cell: (f64, f64), p: LocalFn, q: LocalFn, c: f64) -> f64 {
    let (y0, y1) = cell;
    let h = y1 - y0;
    let d = product(p.reference(h), q.reference(h));
    let e = exp_moments(c * h);
    h * (c * y0).exp() * (d[0] * e[0] + d[1] * e[1] + d[2] * e[2])
}

/// An assembled 1D block with its provenance.
#[derive(Debug, Clone)]
pub struct BlockMatrix1D {
    pub kind: BlockKind,
    pub weight: WeightSpec,
    pub entries: CsrMatrix,
}

pub fn assemble_1d(kind: BlockKind, weight: WeightSpec, basis: &Basis1D) -> Result<BlockMatrix1D> {
    let mesh = &basis.mesh;
    let (trial_d, test_d) = match kind {
        BlockKind::Mass => (false, false),
        BlockKind::Stiffness => (true, true),
        BlockKind::Convection => (true, false),
    };
    let mut triplets = Vec::with_capacity(4 * mesh.n_cells());
    for cell in 0..mesh.n_cells() {
        let span = (mesh.node(cell), mesh.node(cell + 1));
        for test in 0..2u8 {
            let Some(i) = basis.node_dof(cell + test as usize) else { continue };
            for trial in 0..2u8 {
                let Some(j) = basis.node_dof(cell + trial as usize) else { continue };
                let p = LocalFn { node: trial, derivative: trial_d };
                let q = LocalFn { node: test, derivative: test_d };
                let v = match weight {
                    WeightSpec::Power(a) => weighted_moment(span, p, q, a)?,
                    WeightSpec::Exponential(c) => exponential_moment(span, p, q, c),
                };
                triplets.push((i, j, v));
            }
        }
    }
    let n = basis.n_dofs();
    Ok(BlockMatrix1D { kind, weight, entries: CsrMatrix::from_triplets(n, n, triplets) })
}

/// Discretization of the log-volatility axis.
#[derive(Debug, Clone, PartialEq)]
pub enum VolAxis {
    Fem(Basis1D),
    /// Constant volatility: a single unknown at `y = ln σ`.
    Frozen { y: f64 },
}

impl VolAxis {
    pub fn n_dofs(&self) -> usize {
        match self {
            VolAxis::Fem(b) => b.n_dofs(),
            VolAxis::Frozen { .. } => 1,
        }
    }

    /// Values of the axis basis at `y` (interpolation weights over the dofs).
    pub fn evaluate(&self, coeffs: &[f64], y: f64) -> Result<f64> {
        match self {
            VolAxis::Fem(b) => Ok(b.evaluate(coeffs, &[y])?[0]),
            VolAxis::Frozen { .. } => Ok(coeffs[0]),
        }
    }

    pub fn block(&self, kind: BlockKind, weight: WeightSpec) -> Result<CsrMatrix> {
        match self {
            VolAxis::Fem(b) => Ok(assemble_1d(kind, weight, b)?.entries),
            VolAxis::Frozen { y } => Ok(match (kind, weight) {
                (BlockKind::Mass, WeightSpec::Exponential(c)) => {
                    CsrMatrix::from_triplets(1, 1, vec![(0, 0, (c * y).exp())])
                }
                (BlockKind::Mass, WeightSpec::Power(_)) => CsrMatrix::identity(1),
                _ => CsrMatrix::zeros(1, 1),
            }),
        }
    }
}

/// One Kronecker term `coefficient · X ⊗ Y` of an assembled operator.
#[derive(Debug, Clone)]
pub struct KroneckerTerm {
    pub label: &'static str,
    pub coefficient: f64,
    pub x: CsrMatrix,
    pub y: CsrMatrix,
}

impl KroneckerTerm {
    pub fn matrix(&self) -> CsrMatrix {
        CsrMatrix::kron(&self.x, &self.y).scale(self.coefficient)
    }
}

/// Assembled bivariate operators with their Kronecker provenance.
#[derive(Debug, Clone)]
pub struct TensorOperator {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub vnorm_gram: CsrMatrix,
    pub stiffness_terms: Vec<KroneckerTerm>,
    pub gram_terms: Vec<KroneckerTerm>,
    pub n_x: usize,
    pub n_y: usize,
}

fn sum_terms(terms: &[KroneckerTerm], n: usize) -> CsrMatrix {
    let mats: Vec<CsrMatrix> = terms.iter().map(KroneckerTerm::matrix).collect();
    if mats.is_empty() {
        return CsrMatrix::zeros(n, n);
    }
    let refs: Vec<(f64, &CsrMatrix)> = mats.iter().map(|m| (1.0, m)).collect();
    CsrMatrix::linear_combination(&refs)
}

fn checked_mu(params: &SabrParams, spec: &DiscretizationSpec) -> Result<WeightExponent> {
    validate_params(params)?;
    WeightExponent::new(spec.mu.value(), params.beta)
}

/// `M^x_{x^μ} ⊗ M^y_1`.
pub fn mass_terms(params: &SabrParams, spec: &DiscretizationSpec) -> Result<Vec<KroneckerTerm>> {
    let mu = checked_mu(params, spec)?.value();
    let xb = spec.x_basis()?;
    let ya = spec.vol_axis(params)?;
    Ok(vec![KroneckerTerm {
        label: "M^x_{x^mu} (x) M^y_1",
        coefficient: 1.0,
        x: assemble_1d(BlockKind::Mass, WeightSpec::Power(mu), &xb)?.entries,
        y: ya.block(BlockKind::Mass, WeightSpec::Exponential(0.0))?,
    }])
}

/// The six Kronecker terms of the stiffness matrix; terms with a zero
/// coefficient are omitted.
pub fn stiffness_terms(params: &SabrParams, spec: &DiscretizationSpec) -> Result<Vec<KroneckerTerm>> {
    let mu = checked_mu(params, spec)?;
    let c = operator_coefficients(params, mu);
    let (beta, mu) = (params.beta, mu.value());
    let s = 2.0 * beta + mu;
    let xb = spec.x_basis()?;
    let ya = spec.vol_axis(params)?;

    let xblock = |kind, a| assemble_1d(kind, WeightSpec::Power(a), &xb).map(|b| b.entries);
    let yblock = |kind, c| ya.block(kind, WeightSpec::Exponential(c));
    use BlockKind::*;

    let mut terms = Vec::new();
    let mut push = |label, coefficient: f64, x: &dyn Fn() -> Result<CsrMatrix>, y: &dyn Fn() -> Result<CsrMatrix>| -> Result<()> {
        if coefficient != 0.0 {
            terms.push(KroneckerTerm { label, coefficient, x: x()?, y: y()? });
        }
        Ok(())
    };
    push("Qxx S^x_{x^(2b+mu)} (x) M^y_{e^2y}", c.qxx, &|| xblock(Stiffness, s), &|| yblock(Mass, 2.0))?;
    push(
        "Qxy B^x_{x^(b+mu)} (x) (B^y_{e^y})^T",
        c.qxy,
        &|| xblock(Convection, beta + mu),
        &|| Ok(yblock(Convection, 1.0)?.transpose()),
    )?;
    push("Qyy M^x_{x^mu} (x) S^y_1", c.qyy, &|| xblock(Mass, mu), &|| yblock(Stiffness, 0.0))?;
    push("cx1 B^x_{x^(2b+mu-1)} (x) M^y_{e^2y}", c.cx1, &|| xblock(Convection, s - 1.0), &|| yblock(Mass, 2.0))?;
    push("cx2 B^x_{x^(b+mu)} (x) M^y_{e^y}", c.cx2, &|| xblock(Convection, beta + mu), &|| yblock(Mass, 1.0))?;
    push("cy M^x_{x^mu} (x) B^y_1", c.cy, &|| xblock(Mass, mu), &|| yblock(Convection, 0.0))?;
    Ok(terms)
}

/// Gram matrix terms of the coercivity norm
/// `‖x^{β+μ/2} e^y ∂x u‖² + ‖x^{μ/2} ∂y u‖² + ‖x^{μ/2} u‖²`.
pub fn gram_terms(params: &SabrParams, spec: &DiscretizationSpec) -> Result<Vec<KroneckerTerm>> {
    let mu = checked_mu(params, spec)?.value();
    let s = 2.0 * params.beta + mu;
    let xb = spec.x_basis()?;
    let ya = spec.vol_axis(params)?;
    let mx = assemble_1d(BlockKind::Mass, WeightSpec::Power(mu), &xb)?.entries;
    let mut terms = vec![KroneckerTerm {
        label: "S^x_{x^(2b+mu)} (x) M^y_{e^2y}",
        coefficient: 1.0,
        x: assemble_1d(BlockKind::Stiffness, WeightSpec::Power(s), &xb)?.entries,
        y: ya.block(BlockKind::Mass, WeightSpec::Exponential(2.0))?,
    }];
    if let VolAxis::Fem(_) = ya {
        terms.push(KroneckerTerm {
            label: "M^x_{x^mu} (x) S^y_1",
            coefficient: 1.0,
            x: mx.clone(),
            y: ya.block(BlockKind::Stiffness, WeightSpec::Exponential(0.0))?,
        });
    }
    terms.push(KroneckerTerm {
        label: "M^x_{x^mu} (x) M^y_1",
        coefficient: 1.0,
        x: mx,
        y: ya.block(BlockKind::Mass, WeightSpec::Exponential(0.0))?,
    });
    Ok(terms)
}

pub fn assemble_mass(params: &SabrParams, spec: &DiscretizationSpec) -> Result<CsrMatrix> {
    let terms = mass_terms(params, spec)?;
    Ok(terms[0].matrix())
}

pub fn assemble_stiffness(params: &SabrParams, spec: &DiscretizationSpec) -> Result<CsrMatrix> {
    let n = spec.n_dofs(params)?;
    Ok(sum_terms(&stiffness_terms(params, spec)?, n))
}

pub fn assemble_vnorm_gram(params: &SabrParams, spec: &DiscretizationSpec) -> Result<CsrMatrix> {
    let n = spec.n_dofs(params)?;
    Ok(sum_terms(&gram_terms(params, spec)?, n))
}

/// Mass, stiffness and Gram matrices in one pass.
pub fn assemble_operator(params: &SabrParams, spec: &DiscretizationSpec) -> Result<TensorOperator> {
    let n_x = spec.x_basis()?.n_dofs();
    let n_y = spec.vol_axis(params)?.n_dofs();
    let stiffness_terms = stiffness_terms(params, spec)?;
    let gram_terms = gram_terms(params, spec)?;
    let n = n_x * n_y;
    Ok(TensorOperator {
        mass: assemble_mass(params, spec)?,
        stiffness: sum_terms(&stiffness_terms, n),
        vnorm_gram: sum_terms(&gram_terms, n),
        stiffness_terms,
        gram_terms,
        n_x,
        n_y,
    })
}
