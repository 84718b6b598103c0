//! Compressed sparse row matrices, Kronecker products and a banded LU
//! factorization with partial pivoting.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-major compressed sparse matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: vec![1.0; n] }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *data.last_mut().expect("duplicate follows an entry") += v;
            } else {
                indptr[r + 1] += 1;
                indices.push(c);
                data.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Iterates `(col, value)` over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.data[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec length mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        (0..self.nrows).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `Σ c_k A_k` over matrices of identical shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Self {
        let (nrows, ncols) = terms.first().map(|(_, m)| (m.nrows, m.ncols)).expect("empty combination");
        let mut t = Vec::new();
        for (c, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols), "shape mismatch in linear combination");
            t.extend(m.triplets().map(|(i, j, v)| (i, j, c * v)));
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        Self::linear_combination(&[(1.0, self), (1.0, other)])
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> Self {
        Self::linear_combination(&[(0.5, self), (0.5, &self.transpose())])
    }

    /// `A ⊗ B` with the row index `ia * B.nrows + ib`.
    pub fn kron(a: &CsrMatrix, b: &CsrMatrix) -> Self {
        let mut t = Vec::with_capacity(a.nnz() * b.nnz());
        for (ia, ja, va) in a.triplets() {
            for (ib, jb, vb) in b.triplets() {
                t.push((ia * b.nrows + ib, ja * b.ncols + jb, va * vb));
            }
        }
        Self::from_triplets(a.nrows * b.nrows, a.ncols * b.ncols, t)
    }

    /// Largest `i - j` and `j - i` over stored entries.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.triplets().fold((0, 0), |(kl, ku), (i, j, _)| {
            (kl.max(i.saturating_sub(j)), ku.max(j.saturating_sub(i)))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets().fold(0.0, |m, (i, j, v)| m.max((v - self.get(j, i)).abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Matrix Market coordinate dump for debugging.
    pub fn write_matrix_market(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

/// LU factors of a banded matrix, `P A = L U`, stored LAPACK-style: each row
/// keeps columns `i - kl ..= i + kl + ku`, and `L` multipliers stay in the row
/// where they were produced (row swaps touch only the active columns).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::LengthMismatch { expected: a.nrows, actual: a.ncols });
        }
        let n = a.nrows;
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, width, band: vec![0.0; n * width], pivots: vec![0; n] };
        for (i, j, v) in a.triplets() {
            let p = lu.pos(i, j);
            lu.band[p] = v;
        }
        lu.decompose()?;
        Ok(lu)
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn decompose(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.band[self.pos(j, j)].abs();
            for r in j + 1..=last_row {
                let v = self.band[self.pos(r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || best <= scale * f64::EPSILON * 1e-6 {
                return Err(Error::SingularMatrix { column: j });
            }
            self.pivots[j] = p;
            let last_col = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=last_col {
                    let (a, b) = (self.pos(j, c), self.pos(p, c));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.pos(j, j)];
            for r in j + 1..=last_row {
                let prj = self.pos(r, j);
                let m = self.band[prj] / pivot;
                self.band[prj] = m;
                if m != 0.0 {
                    // both rows store column c: c - r ≥ -kl and c - j ≤ kl + ku
                    let (rj, jj) = (self.pos(r, j), self.pos(j, j));
                    for d in 1..=last_col - j {
                        self.band[rj + d] -= m * self.band[jj + d];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                for r in j + 1..=(j + kl).min(n - 1) {
                    b[r] -= self.band[self.pos(r, j)] * bj;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.band[self.pos(i, c)] * b[c];
            }
            b[i] = s / self.band[self.pos(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn kron_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let b = tridiag(3, -1.0, 2.0, 0.5);
        let k = CsrMatrix::kron(&a, &b).to_dense();
        let (ad, bd) = (a.to_dense(), b.to_dense());
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(k[(i, j)], ad[(i / 3, j / 3)] * bd[(i % 3, j % 3)]);
            }
        }
        assert_eq!(CsrMatrix::kron(&a, &b).bandwidth(), (1, 4));
    }

    #[test]
    fn lu_requires_pivoting() {
        // zero leading entry forces a row swap
        let m = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 1, 1.0), (1, 0, 2.0), (1, 1, 1.0), (1, 2, 1.0), (2, 1, 4.0), (2, 2, 1.0)],
        );
        let lu = BandedLu::factor(&m).unwrap();
        let x = vec![1.0, -2.0, 3.0];
        let b = m.mul_vec(&x);
        let got = lu.solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(BandedLu::factor(&m), Err(Error::SingularMatrix { column: 1 })));
    }

    #[test]
    fn matrix_market_header() {
        let mut out = Vec::new();
        CsrMatrix::identity(2).write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 "));
    }

    proptest! {
        #[test]
        fn banded_solve_matches_dense(
            n in 2usize..30,
            kl in 0usize..4,
            ku in 0usize..4,
            seed in proptest::collection::vec(-1.0f64..1.0, 30 * 9 + 30)
        ) {
            let mut t = Vec::new();
            let mut s = seed.iter().cycle();
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v = *s.next().unwrap();
                    t.push((i, j, if i == j { v + 0.3 } else { v }));
                }
            }
            let a = CsrMatrix::from_triplets(n, n, t);
            let dense = a.to_dense();
            prop_assume!(dense.clone().lu().determinant().abs() > 1e-6);
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = BandedLu::factor(&a).unwrap().solve(&b);
            let r = a.mul_vec(&x);
            for i in 0..n {
                prop_assert!((r[i] - b[i]).abs() < 1e-8 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
            }
        }
    }
}
