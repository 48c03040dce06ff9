//! Symmetric tridiagonal eigenproblems arising inside Lanczos.

use crate::scalar::Scalar;

#[derive(Clone, Debug, Default)]
pub struct Tridiagonal<T> {
    pub alpha: Vec<T>,
    /// Off-diagonal, `beta[i]` couples `i` and `i + 1`.
    pub beta: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    fn gershgorin(&self) -> (T, T) {
        let n = self.len();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let mut r = T::zero();
            if i > 0 {
                r += self.beta[i - 1].abs();
            }
            if i + 1 < n {
                r += self.beta[i].abs();
            }
            lo = lo.min(self.alpha[i] - r);
            hi = hi.max(self.alpha[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: T) -> usize {
        let tiny = T::min_positive_value().sqrt();
        let mut count = 0;
        let mut q = T::one();
        for i in 0..self.len() {
            let b2 = if i > 0 { self.beta[i - 1] * self.beta[i - 1] } else { T::zero() };
            q = if i == 0 { self.alpha[0] - x } else { self.alpha[i] - x - b2 / q };
            if q == T::zero() {
                q = tiny;
            }
            if q < T::zero() {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> T {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let two = T::lit(2.0);
        for _ in 0..300 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) / two
    }

    /// Unit eigenvector for an (accurate) eigenvalue by inverse iteration.
    pub fn eigenvector(&self, theta: T) -> Vec<T> {
        let n = self.len();
        if n == 1 {
            return vec![T::one()];
        }
        let (lo, hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(T::one());
        let shift = theta - T::lit(10.0) * T::epsilon() * scale;
        let mut y: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.01) * T::from_count(i % 7)).collect();
        for _ in 0..4 {
            y = self.solve_shifted(shift, &y, scale);
            let nrm = y.iter().map(|&v| v * v).sum::<T>().sqrt();
            if !(nrm.is_finite() && nrm > T::zero()) {
                break;
            }
            for v in y.iter_mut() {
                *v /= nrm;
            }
        }
        y
    }

    /// Solves (T - shift) x = b with partial pivoting.
    fn solve_shifted(&self, shift: T, b: &[T], scale: T) -> Vec<T> {
        let n = self.len();
        let tiny = T::epsilon() * scale * T::lit(1e-3);
        let mut d: Vec<T> = self.alpha.iter().map(|&a| a - shift).collect();
        let mut dl = self.beta.clone();
        let mut du = self.beta.clone();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == T::zero() {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                x[i + 1] = x[i + 1] - fact * x[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
                let tb = x[i];
                x[i] = x[i + 1];
                x[i + 1] = tb - fact * x[i + 1];
            }
            dl[i] = T::zero();
        }
        if d[n - 1] == T::zero() {
            d[n - 1] = tiny;
        }
        x[n - 1] = x[n - 1] / d[n - 1];
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> Tridiagonal<f64> {
        Tridiagonal {
            alpha: vec![2.0; n],
            beta: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn laplacian_spectrum() {
        let n = 12;
        let t = laplacian(n);
        for k in 0..n {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k) - exact).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn eigenvector_residual_small() {
        let t = Tridiagonal {
            alpha: vec![1.0f64, -0.5, 3.0, 0.25, 2.0],
            beta: vec![0.7, 0.0, 1.1, -0.3],
        };
        for k in 0..5 {
            let th = t.eigenvalue(k);
            let y = t.eigenvector(th);
            let n = y.len();
            let mut res = 0.0f64;
            for i in 0..n {
                let mut v = (t.alpha[i] - th) * y[i];
                if i > 0 {
                    v += t.beta[i - 1] * y[i - 1];
                }
                if i + 1 < n {
                    v += t.beta[i] * y[i + 1];
                }
                res = res.max(v.abs());
            }
            assert!(res < 1e-12, "k={k} res={res}");
        }
    }
}
