use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

/// Row-major dense matrix used for Weyl operators and small reference
/// computations.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * alpha).collect(),
        }
    }

    /// self + alpha * other
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Max absolute row sum (induced infinity norm).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().map(|v| v.abs()).sum())
            .fold(T::zero(), |m: T, s: T| m.max(s))
    }

    /// Leading principal block restricted to the given index prefixes.
    pub fn block(&self, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self[(r, c)])
    }

    /// Matrix exponential by scaling and squaring with a Taylor core.
    pub fn expm(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let norm = self.norm_inf();
        let mut squarings = 0u32;
        let half = T::lit(0.5);
        let mut scaled = self.clone();
        let mut s = norm;
        while s > half {
            s = s * half;
            squarings += 1;
        }
        if squarings > 0 {
            scaled = self.scale(T::lit(0.5f64.powi(squarings as i32)));
        }
        let mut result = Self::identity(n);
        let mut term = Self::identity(n);
        let eps = T::epsilon();
        for j in 1..=30 {
            term = term.matmul(&scaled).scale(T::one() / T::from_count(j));
            result = result.add_scaled(T::one(), &term);
            if term.max_abs() <= eps * result.max_abs() {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 1.3f64;
        let g = DenseMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => -t,
            (1, 0) => t,
            _ => 0.0,
        });
        let e = g.expm();
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-14);
        assert!((e[(1, 0)] - t.sin()).abs() < 1e-14);
        assert!((e[(0, 1)] + t.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal() {
        let g = DenseMatrix::from_fn(3, 3, |r, c| if r == c { r as f64 - 1.5 } else { 0.0 });
        let e = g.expm();
        for i in 0..3 {
            let want = (i as f64 - 1.5).exp();
            assert!((e[(i, i)] - want).abs() < 1e-14 * want.max(1.0));
        }
    }

    #[test]
    fn expm_f32_runs() {
        let g = DenseMatrix::<f32>::from_fn(2, 2, |r, c| if r != c { 0.25 } else { 0.0 });
        let e = g.expm();
        assert!((e[(0, 0)] - 0.25f32.cosh()).abs() < 1e-6);
    }
}
