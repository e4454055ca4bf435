//! Compressed-row complex sparse matrices.
//!
//! Used both for operators on a Hilbert space and for vectorized
//! superoperators. Construction from triplets sums duplicates and drops
//! structural zeros below `1e-15` of the largest magnitude.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64 as C64;

const DROP_REL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let t = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), t)
    }

    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            debug_assert!(r < nrows && c < ncols);
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let max = merged.iter().fold(0.0f64, |m, e| m.max(e.2.norm()));
        let cut = max * DROP_REL;
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            if v.norm() > cut && v != C64::new(0.0, 0.0) {
                indptr[r + 1] += 1;
                indices.push(c);
                values.push(v);
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(m: &Mat<C64>) -> Self {
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[a..b].binary_search(&c) {
            Ok(k) => self.values[a + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `y = A† x`.
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for (r, c, v) in self.iter() {
            y[c] += v.conj() * x[r];
        }
        y
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        let t = self.iter().map(|(r, c, v)| (r, c, f(v))).collect();
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn transpose(&self) -> Self {
        let t = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn adjoint(&self) -> Self {
        let t = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn conj(&self) -> Self {
        self.map_values(|v| v.conj())
    }

    /// Linear combination `a·self + b·other`.
    pub fn axpby(&self, a: C64, other: &CsrMatrix, b: C64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.iter().map(|(r, c, v)| (r, c, a * v)).collect();
        t.extend(other.iter().map(|(r, c, v)| (r, c, b * v)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        self.axpby(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &CsrMatrix) -> Self {
        self.axpby(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut seen = vec![false; other.ncols];
        let mut touched = Vec::new();
        let mut t = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                t.push((r, c, acc[c]));
                acc[c] = C64::new(0.0, 0.0);
                seen[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CsrMatrix) -> Self {
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                t.push((r1 * other.nrows + r2, c1 * other.ncols + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.nrows * other.nrows, self.ncols * other.ncols, t)
    }

    /// `self − σ I`.
    pub fn shifted(&self, sigma: C64) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let mut t: Vec<_> = self.iter().collect();
        t.extend((0..self.nrows).map(|i| (i, i, -sigma)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// Copy with row `r` replaced by the given entries.
    pub fn with_row_replaced(&self, r: usize, entries: &[(usize, C64)]) -> Self {
        let mut t: Vec<_> = self.iter().filter(|e| e.0 != r).collect();
        t.extend(entries.iter().map(|&(c, v)| (r, c, v)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn to_faer(&self) -> SparseColMat<usize, C64> {
        let t: Vec<Triplet<usize, usize, C64>> = self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t).expect("valid sparse pattern")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn duplicates_summed_and_zeros_dropped() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, c(1.0)), (1, 0, c(-1.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0));
        assert_eq!(m.get(1, 0), c(0.0));
    }

    #[test]
    fn kron_matches_dense_definition() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, c(1.0)), (0, 1, C64::new(0.0, 2.0)), (1, 1, c(3.0))]);
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(5.0)), (1, 0, c(7.0))]);
        let k = a.kron(&b).to_dense();
        let (ad, bd) = (a.to_dense(), b.to_dense());
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(k[(i, j)], ad[(i / 2, j / 2)] * bd[(i % 2, j % 2)]);
            }
        }
    }

    #[test]
    fn matmul_and_adjoint() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(0, 0, c(1.0)), (1, 2, C64::new(1.0, 1.0))]);
        let p = a.matmul(&a.adjoint());
        assert_eq!(p.get(0, 0), c(1.0));
        assert_eq!(p.get(1, 1), c(2.0));
        assert_eq!(p.get(0, 1), c(0.0));
        let x = vec![c(1.0), c(2.0)];
        assert_eq!(a.apply_adjoint(&x), vec![c(1.0), c(0.0), C64::new(2.0, -2.0)]);
    }
}
