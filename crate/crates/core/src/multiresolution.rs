//! Dyadic meshes, piecewise-linear nodal bases with a hierarchical
//! (Yserentant-type) transform, and weighted L² projection.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_1d, BlockKind, WeightSpec};
use crate::error::{Error, Result};
use crate::quadrature::{cached_jacobi, cached_legendre};
use crate::sparse::BandedLu;

/// Uniform mesh of `base_cells · 2^level` cells on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicMesh {
    pub a: f64,
    pub b: f64,
    pub level: u32,
    pub base_cells: usize,
}

pub fn build_mesh(interval: (f64, f64), level: u32, base_cells: usize) -> Result<DyadicMesh> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::validation("interval", format!("[{a}, {b}] is not a proper interval")));
    }
    if base_cells == 0 {
        return Err(Error::validation("base_cells", "must be at least 1"));
    }
    if level > 24 {
        return Err(Error::validation("level", format!("{level} exceeds the supported maximum 24")));
    }
    Ok(DyadicMesh { a, b, level, base_cells })
}

impl DyadicMesh {
    pub fn n_cells(&self) -> usize {
        self.base_cells << self.level
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells() + 1
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n_cells() as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells() {
            self.b
        } else {
            self.a + i as f64 * (self.b - self.a) / self.n_cells() as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    pub fn refine(&self) -> Self {
        Self { level: self.level + 1, ..*self }
    }

    pub fn coarsen(&self) -> Option<Self> {
        self.level.checked_sub(1).map(|level| Self { level, ..*self })
    }

    /// Index of the cell containing `x`; the right endpoint belongs to the last cell.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let tol = 1e-12 * (self.b - self.a);
        if !(x >= self.a - tol && x <= self.b + tol) {
            return Err(Error::OutOfDomain { point: x, lo: self.a, hi: self.b });
        }
        let t = ((x - self.a) / (self.b - self.a) * self.n_cells() as f64).floor();
        Ok((t.max(0.0) as usize).min(self.n_cells() - 1))
    }
}

/// Boundary treatment of an end node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// The node is removed; functions vanish there.
    EssentialZero,
    /// The node carries a degree of freedom.
    Free,
}

/// Nodal hat basis on a mesh with the essential end nodes removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis1D {
    pub mesh: DyadicMesh,
    pub left: Boundary,
    pub right: Boundary,
}

/// Direction of [`hierarchical_transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToHierarchical,
    ToNodal,
}

/// Detail blocks `W^0 … W^L` of a hierarchical expansion over the active dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalCoeffs {
    pub blocks: Vec<Vec<f64>>,
}

impl HierarchicalCoeffs {
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.concat()
    }
}

impl Basis1D {
    pub fn new(mesh: DyadicMesh, left: Boundary, right: Boundary) -> Self {
        Self { mesh, left, right }
    }

    fn first_node(&self) -> usize {
        usize::from(self.left == Boundary::EssentialZero)
    }

    fn last_node(&self) -> usize {
        self.mesh.n_cells() - usize::from(self.right == Boundary::EssentialZero)
    }

    pub fn n_dofs(&self) -> usize {
        (self.last_node() + 1).saturating_sub(self.first_node())
    }

    pub fn dof_node(&self, dof: usize) -> usize {
        dof + self.first_node()
    }

    pub fn node_dof(&self, node: usize) -> Option<usize> {
        (node >= self.first_node() && node <= self.last_node()).then(|| node - self.first_node())
    }

    pub fn dof_coordinates(&self) -> Vec<f64> {
        (0..self.n_dofs()).map(|d| self.mesh.node(self.dof_node(d))).collect()
    }

    /// Nodal values on every mesh node, zero on essential nodes.
    pub fn expand(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.n_nodes()];
        full[self.first_node()..=self.last_node()].copy_from_slice(coeffs);
        full
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.n_dofs() {
            return Err(Error::LengthMismatch { expected: self.n_dofs(), actual: coeffs.len() });
        }
        Ok(())
    }

    /// Hierarchical level of a node: 0 for base nodes, `l` for nodes first
    /// appearing at level `l`.
    pub fn node_level(&self, node: usize) -> u32 {
        let big = self.mesh.level;
        if node == 0 {
            return 0;
        }
        let tz = node.trailing_zeros().min(big);
        big - tz
    }

    pub fn to_hierarchical(&self, nodal: &[f64]) -> Result<HierarchicalCoeffs> {
        self.check_len(nodal)?;
        let mut v = self.expand(nodal);
        let big = self.mesh.level;
        for l in (1..=big).rev() {
            let s = 1usize << (big - l);
            let mut i = s;
            while i < self.mesh.n_cells() {
                v[i] -= 0.5 * (v[i - s] + v[i + s]);
                i += 2 * s;
            }
        }
        let mut blocks = vec![Vec::new(); big as usize + 1];
        for node in self.first_node()..=self.last_node() {
            blocks[self.node_level(node) as usize].push(v[node]);
        }
        Ok(HierarchicalCoeffs { blocks })
    }

    pub fn from_hierarchical(&self, coeffs: &HierarchicalCoeffs) -> Result<Vec<f64>> {
        let big = self.mesh.level;
        if coeffs.blocks.len() != big as usize + 1 {
            return Err(Error::LengthMismatch { expected: big as usize + 1, actual: coeffs.blocks.len() });
        }
        let mut v = vec![0.0; self.mesh.n_nodes()];
        let mut cursor = vec![0usize; big as usize + 1];
        for node in self.first_node()..=self.last_node() {
            let l = self.node_level(node) as usize;
            let block = &coeffs.blocks[l];
            v[node] = *block
                .get(cursor[l])
                .ok_or(Error::LengthMismatch { expected: cursor[l] + 1, actual: block.len() })?;
            cursor[l] += 1;
        }
        for (l, block) in coeffs.blocks.iter().enumerate() {
            if cursor[l] != block.len() {
                return Err(Error::LengthMismatch { expected: cursor[l], actual: block.len() });
            }
        }
        for l in 1..=big {
            let s = 1usize << (big - l);
            let mut i = s;
            while i < self.mesh.n_cells() {
                v[i] += 0.5 * (v[i - s] + v[i + s]);
                i += 2 * s;
            }
        }
        Ok(v[self.first_node()..=self.last_node()].to_vec())
    }

    /// Piecewise-linear interpolation of a dof vector at `points`.
    pub fn evaluate(&self, coeffs: &[f64], points: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        let full = self.expand(coeffs);
        points
            .iter()
            .map(|&x| {
                let c = self.mesh.locate(x)?;
                let (x0, x1) = (self.mesh.node(c), self.mesh.node(c + 1));
                let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                Ok(full[c] * (1.0 - t) + full[c + 1] * t)
            })
            .collect()
    }

    /// Interpolates a function at the dof nodes.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.dof_coordinates().into_iter().map(f).collect()
    }

    /// Same space one level finer.
    pub fn refine(&self) -> Self {
        Self { mesh: self.mesh.refine(), ..self.clone() }
    }

    /// Exact embedding of a level-`l` function into the level-`l+1` basis.
    pub fn prolongate(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        let fine = self.refine();
        let coarse = self.expand(coeffs);
        let mut full = vec![0.0; fine.mesh.n_nodes()];
        for (i, v) in full.iter_mut().enumerate() {
            *v = if i % 2 == 0 { coarse[i / 2] } else { 0.5 * (coarse[i / 2] + coarse[i / 2 + 1]) };
        }
        Ok(full[fine.first_node()..=fine.last_node()].to_vec())
    }

    /// Repeated [`Basis1D::prolongate`] up to `target_level`.
    pub fn prolongate_to(&self, coeffs: &[f64], target_level: u32) -> Result<Vec<f64>> {
        let mut basis = self.clone();
        let mut c = coeffs.to_vec();
        while basis.mesh.level < target_level {
            c = basis.prolongate(&c)?;
            basis = basis.refine();
        }
        Ok(c)
    }

    /// Injection onto the next coarser level (left inverse of prolongation).
    pub fn restrict(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        let coarse_mesh = self
            .mesh
            .coarsen()
            .ok_or_else(|| Error::validation("level", "cannot restrict below level 0"))?;
        let coarse = Basis1D { mesh: coarse_mesh, ..self.clone() };
        let full = self.expand(coeffs);
        let picked: Vec<f64> = (0..coarse.mesh.n_nodes()).map(|i| full[2 * i]).collect();
        Ok(picked[coarse.first_node()..=coarse.last_node()].to_vec())
    }
}

/// Flat hierarchical transform: level-0 block first, then `W^1, W^2, …`.
pub fn hierarchical_transform(basis: &Basis1D, coeffs: &[f64], direction: Direction) -> Result<Vec<f64>> {
    match direction {
        Direction::ToHierarchical => Ok(basis.to_hierarchical(coeffs)?.flatten()),
        Direction::ToNodal => {
            basis.check_len(coeffs)?;
            let sizes = basis.to_hierarchical(&vec![0.0; coeffs.len()])?;
            let mut blocks = Vec::with_capacity(sizes.blocks.len());
            let mut start = 0;
            for b in &sizes.blocks {
                blocks.push(coeffs[start..start + b.len()].to_vec());
                start += b.len();
            }
            basis.from_hierarchical(&HierarchicalCoeffs { blocks })
        }
    }
}

const PROJECTION_POINTS: usize = 8;

/// `∫_p^q x^a g(x) dx` for smooth `g`, resolving the weight at `x = 0`.
///
/// Subintervals touching the origin use Gauss–Jacobi; intervals close to the
/// origin relative to their length are split geometrically so every piece
/// stays at least one length away from the singularity.
pub(crate) fn weighted_integral(p: f64, q: f64, a: f64, n: usize, g: &impl Fn(f64) -> f64) -> f64 {
    if q <= p {
        return 0.0;
    }
    if a == 0.0 {
        return cached_legendre(n).integrate(p, q, g);
    }
    if p <= 0.0 {
        return cached_jacobi(n, 0.0, a).integrate_power_left(q, a, g);
    }
    let rule = cached_legendre(n);
    let mut total = 0.0;
    let mut lo = p;
    while lo < q {
        let hi = if q - lo > lo { (2.0 * lo).min(q) } else { q };
        total += rule.integrate(lo, hi, |x| x.powf(a) * g(x));
        lo = hi;
    }
    total
}

/// Weighted L² projection onto the basis with weight `x^a`.
///
/// `breakpoints` lists kinks of `f`; cells are split there so the per-cell
/// Gauss rules only see smooth integrands.
pub fn project(
    f: impl Fn(f64) -> f64,
    basis: &Basis1D,
    a: f64,
    breakpoints: &[f64],
) -> Result<Vec<f64>> {
    let mass = assemble_1d(BlockKind::Mass, WeightSpec::Power(a), basis)?;
    let rhs = projection_rhs(&f, basis, a, breakpoints)?;
    let lu = BandedLu::factor(&mass.entries)?;
    Ok(lu.solve(&rhs))
}

/// `b_i = ∫ f φ_i x^a` over the active dofs.
pub fn projection_rhs(
    f: &impl Fn(f64) -> f64,
    basis: &Basis1D,
    a: f64,
    breakpoints: &[f64],
) -> Result<Vec<f64>> {
    let mesh = &basis.mesh;
    if a != 0.0 && mesh.a < 0.0 {
        return Err(Error::validation("weight", "power weights need a nonnegative interval"));
    }
    let mut rhs = vec![0.0; basis.n_dofs()];
    for c in 0..mesh.n_cells() {
        let (x0, x1) = (mesh.node(c), mesh.node(c + 1));
        let h = x1 - x0;
        let mut cuts = vec![x0];
        cuts.extend(breakpoints.iter().copied().filter(|&b| b > x0 && b < x1));
        cuts.push(x1);
        for (local, node) in [(0usize, c), (1, c + 1)] {
            let Some(dof) = basis.node_dof(node) else { continue };
            let hat = |x: f64| if local == 0 { (x1 - x) / h } else { (x - x0) / h };
            let g = |x: f64| f(x) * hat(x);
            rhs[dof] += cuts
                .windows(2)
                .map(|w| weighted_integral(w[0], w[1], a, PROJECTION_POINTS, &g))
                .sum::<f64>();
        }
    }
    Ok(rhs)
}
