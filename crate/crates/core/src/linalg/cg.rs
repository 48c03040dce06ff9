use crate::linalg::{axpy, dot, norm, LinearOperator};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct CgOptions<T> {
    pub rel_tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for CgOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            max_iter: 5000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgResult<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// True residual ‖b − A x‖ / ‖b‖ recomputed at exit.
    pub relative_residual: T,
    pub converged: bool,
}

fn project_out<T: Scalar>(u: Option<&[T]>, x: &mut [T]) {
    if let Some(u) = u {
        let c = dot(u, x);
        axpy(-c, u, x);
    }
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. `inv_diag` is an optional Jacobi preconditioner; `deflate` is an
/// optional unit vector whose span is removed from the problem, which lets a
/// positive semidefinite operator with that kernel be inverted on the
/// orthogonal complement.
pub fn conjugate_gradient<T, A>(
    op: &A,
    b: &[T],
    opts: &CgOptions<T>,
    inv_diag: Option<&[T]>,
    deflate: Option<&[T]>,
) -> CgResult<T>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let n = op.dim();
    assert_eq!(b.len(), n);
    let mut rhs = b.to_vec();
    project_out(deflate, &mut rhs);
    let bnorm = norm(&rhs);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return CgResult {
            x,
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        };
    }
    let precondition = |r: &[T]| -> Vec<T> {
        let mut z: Vec<T> = match inv_diag {
            Some(d) => r.iter().zip(d).map(|(&a, &m)| a * m).collect(),
            None => r.to_vec(),
        };
        project_out(deflate, &mut z);
        z
    };
    let mut r = rhs.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        op.apply(&p, &mut ap);
        project_out(deflate, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let step = rz / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        iterations += 1;
        if norm(&r) <= opts.rel_tol * bnorm {
            converged = true;
            break;
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let gamma = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + gamma * *pi;
        }
    }
    op.apply(&x, &mut ap);
    project_out(deflate, &mut ap);
    let res: Vec<T> = rhs.iter().zip(&ap).map(|(&a, &b)| a - b).collect();
    let relative_residual = norm(&res) / bnorm;
    CgResult {
        x,
        iterations,
        relative_residual,
        converged: converged && relative_residual <= opts.rel_tol * T::lit(10.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;

    #[test]
    fn solves_spd_system() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0 + i as f64 * 0.1));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let inv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
        let r = conjugate_gradient(&a, &b, &CgOptions::default(), Some(&inv), None);
        assert!(r.converged);
        let ax = a.apply(&r.x);
        let err = ax.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn deflation_inverts_on_complement() {
        // A = diag(0, 1, 2) with kernel e0.
        let a = CsrMatrix::<f64>::from_diagonal(&[0.0, 1.0, 2.0]);
        let u = [1.0, 0.0, 0.0];
        let r = conjugate_gradient(&a, &[5.0, 1.0, 1.0], &CgOptions::default(), None, Some(&u));
        assert!(r.converged);
        assert!(r.x[0].abs() < 1e-14);
        assert!((r.x[1] - 1.0).abs() < 1e-12);
        assert!((r.x[2] - 0.5).abs() < 1e-12);
    }
}
