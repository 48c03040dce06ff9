use std::ops::Range;

use crate::linalg::dense::DenseMatrix;
use crate::linalg::LinearOperator;
use crate::scalar::Scalar;

/// Compressed sparse row matrix.
///
/// Symmetric operators are stored with both triangles present; nothing in
/// this crate relies on implied symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

/// Real symmetric operator on a Fock basis, full storage.
pub type SparseSymmetricOperator<T> = CsrMatrix<T>;

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut indices = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n);
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != T::zero() {
                indices.push(i);
                data.push(d);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: n,
            ncols: n,
            indptr,
            indices,
            data,
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *data.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            data.push(v);
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(indices.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(data) {
            if v != T::zero() {
                indptr[r + 1] += 1;
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices: keep_idx,
            data: keep_val,
        }
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.data[span.start + pos],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    /// y += alpha A x
    pub fn mul_vec_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yr += alpha * acc;
        }
    }

    /// y += alpha Aᵀ x
    pub fn mul_vec_transpose_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == T::zero() {
                continue;
            }
            let s = alpha * xr;
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.data[k] * s;
            }
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let trips = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trips)
    }

    pub fn scale(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= alpha;
        }
        out
    }

    /// self + alpha * other
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trips: Vec<_> = self.triplets().collect();
        trips.extend(other.triplets().map(|(r, c, v)| (r, c, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, trips)
    }

    pub fn add_diagonal(&self, diag: &[T]) -> Self {
        self.add_scaled(T::one(), &Self::from_diagonal(diag))
    }

    /// self + diag(d), merging row by row without a global sort.
    pub fn plus_diagonal(&self, d: &[T]) -> Self {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(d.len(), self.nrows);
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + self.nrows);
        let mut data = Vec::with_capacity(self.nnz() + self.nrows);
        indptr.push(0);
        for r in 0..self.nrows {
            let mut placed = d[r] == T::zero();
            for (c, v) in self.row(r) {
                if !placed && c >= r {
                    if c == r {
                        let s = v + d[r];
                        if s != T::zero() {
                            indices.push(r);
                            data.push(s);
                        }
                        placed = true;
                        continue;
                    }
                    indices.push(r);
                    data.push(d[r]);
                    placed = true;
                }
                indices.push(c);
                data.push(v);
            }
            if !placed {
                indices.push(r);
                data.push(d[r]);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Sub-block with the given row and column ranges.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let mut trips = Vec::new();
        for r in rows.clone() {
            for (c, v) in self.row(r) {
                if cols.contains(&c) {
                    trips.push((r - rows.start, c - cols.start, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), trips)
    }

    /// Sparse product self * other.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![T::zero(); other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for r in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = T::zero();
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != T::zero() {
                    indices.push(c);
                    data.push(acc[c]);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.add_scaled(-T::one(), other)
            .data
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.nrows == self.ncols && self.max_abs_diff(&self.transpose()) <= tol
    }

    /// Row-sum bound on the spectral radius (Gershgorin).
    pub fn gershgorin_bounds(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for r in 0..self.nrows {
            let mut d = T::zero();
            let mut off = T::zero();
            for (c, v) in self.row(r) {
                if c == r {
                    d = v;
                } else {
                    off += v.abs();
                }
            }
            lo = lo.min(d - off);
            hi = hi.max(d + off);
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }
}

impl<T: Scalar> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows, self.ncols, "operator must be square");
        self.nrows
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.mul_vec(x, y)
    }

    fn diagonal(&self) -> Option<Vec<T>> {
        Some(CsrMatrix::diagonal(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let b = a.transpose();
        let p = a.matmul(&b).to_dense();
        let q = a.to_dense().matmul(&b.to_dense());
        assert!(p.max_abs_diff(&q) < 1e-15);
        assert_eq!(p[(0, 0)], 5.0);
    }

    #[test]
    fn plus_diagonal_matches_add() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0), (2, 0, 5.0)]);
        let d = [1.0, -2.0, 3.0];
        assert_eq!(a.plus_diagonal(&d), a.add_diagonal(&d));
    }

    #[test]
    fn block_and_transpose_products() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 2, 4.0), (2, 1, 4.0), (2, 2, -1.0)]);
        let b = a.block(1..3, 1..3);
        assert_eq!(b.get(0, 1), 4.0);
        assert_eq!(b.get(1, 1), -1.0);
        assert!(a.is_symmetric(0.0));
        let x = [1.0, 2.0, 3.0];
        let mut y = vec![0.0; 3];
        a.mul_vec_transpose_add(1.0, &x, &mut y);
        assert_eq!(y, a.apply(&x));
    }
}
