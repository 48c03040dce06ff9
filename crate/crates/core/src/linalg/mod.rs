//! Sparse storage and iterative solvers shared by every module.

pub mod cg;
pub mod dense;
pub mod lanczos;
pub mod sparse;
pub mod tridiag;

pub use cg::{conjugate_gradient, CgOptions, CgResult};
pub use dense::DenseMatrix;
pub use lanczos::{lanczos_extremes, lanczos_lowest, ExtremeEigenvalues, LanczosOptions, LanczosResult};
pub use sparse::{CsrMatrix, SparseSymmetricOperator};

use crate::scalar::Scalar;

/// Symmetric operator known through its action on vectors.
pub trait LinearOperator<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
    fn diagonal(&self) -> Option<Vec<T>> {
        None
    }
}

/// `A − shift·I`.
pub struct Shifted<'a, T, A: ?Sized> {
    pub op: &'a A,
    pub shift: T,
}

impl<T: Scalar, A: LinearOperator<T> + ?Sized> LinearOperator<T> for Shifted<'_, T, A> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.op.apply(x, y);
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi -= self.shift * xi;
        }
    }

    fn diagonal(&self) -> Option<Vec<T>> {
        self.op
            .diagonal()
            .map(|d| d.into_iter().map(|v| v - self.shift).collect())
    }
}

/// Operator given by a closure.
pub struct FnOperator<F> {
    pub dim: usize,
    pub f: F,
}

impl<T: Scalar, F: Fn(&[T], &mut [T]) + Sync> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// y += alpha x
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}
