use crate::linalg::tridiag::Tridiagonal;
use crate::linalg::{axpy, dot, norm, LinearOperator};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct LanczosOptions<T> {
    pub max_iter: usize,
    /// Convergence when the residual estimate of each wanted Ritz pair is
    /// below `tol` times the spectral-radius estimate.
    pub tol: T,
    /// Number of lowest eigenvalues that must converge.
    pub nev: usize,
    pub seed: u64,
    pub check_every: usize,
}

impl<T: Scalar> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 400,
            tol: T::lit(1e-13),
            nev: 2,
            seed: 0x5eed_1a2c,
            check_every: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult<T> {
    /// Lowest Ritz values, ascending (at most `nev`).
    pub eigenvalues: Vec<T>,
    /// Unit Ritz vector of the lowest Ritz value.
    pub eigenvector: Vec<T>,
    /// ‖A x − θ x‖ with θ the Rayleigh quotient of the returned vector.
    pub residual: T,
    pub rayleigh: T,
    pub iterations: usize,
    pub converged: bool,
    pub norm_estimate: T,
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random start vector with entries in (-1, 1).
pub fn start_vector<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut s = seed;
    (0..n)
        .map(|_| T::lit((splitmix(&mut s) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0))
        .collect()
}

struct Krylov<T> {
    q: Vec<Vec<T>>,
    t: Tridiagonal<T>,
    last_beta: T,
    exhausted: bool,
}

fn orthogonalize<T: Scalar>(w: &mut [T], basis: &[Vec<T>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

/// Runs Lanczos with full reorthogonalization, calling `done` every
/// `check_every` steps with the current tridiagonal and next β.
fn run<T, A, F>(op: &A, start: &[T], max_iter: usize, check_every: usize, mut done: F) -> Krylov<T>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    F: FnMut(&Tridiagonal<T>, T) -> bool,
{
    let n = op.dim();
    let mut q0 = start.to_vec();
    let nq = norm(&q0);
    for v in q0.iter_mut() {
        *v /= nq;
    }
    let mut k = Krylov {
        q: vec![q0],
        t: Tridiagonal::default(),
        last_beta: T::zero(),
        exhausted: false,
    };
    let mut w = vec![T::zero(); n];
    let limit = max_iter.min(n).max(1);
    loop {
        let j = k.q.len() - 1;
        op.apply(&k.q[j], &mut w);
        let alpha = dot(&k.q[j], &w);
        k.t.alpha.push(alpha);
        orthogonalize(&mut w, &k.q);
        let beta = norm(&w);
        k.last_beta = beta;
        let steps = k.t.len();
        let scale = k.t.alpha.iter().fold(T::zero(), |m, a| m.max(a.abs())).max(T::one());
        if beta <= T::lit(100.0) * T::epsilon() * scale || steps >= n {
            k.exhausted = true;
            k.last_beta = T::zero();
            return k;
        }
        if steps >= limit || (steps % check_every.max(1) == 0 && done(&k.t, beta)) {
            return k;
        }
        k.t.beta.push(beta);
        let next: Vec<T> = w.iter().map(|&v| v / beta).collect();
        k.q.push(next);
    }
}

fn ritz_vector<T: Scalar>(q: &[Vec<T>], y: &[T]) -> Vec<T> {
    let n = q[0].len();
    let mut x = vec![T::zero(); n];
    for (qi, &yi) in q.iter().zip(y) {
        axpy(yi, qi, &mut x);
    }
    let nx = norm(&x);
    for v in x.iter_mut() {
        *v /= nx;
    }
    x
}

fn spectral_scale<T: Scalar>(t: &Tridiagonal<T>) -> T {
    let m = t.len();
    t.eigenvalue(0).abs().max(t.eigenvalue(m - 1).abs()).max(T::epsilon())
}

/// Lowest eigenpair of a symmetric operator.
pub fn lanczos_lowest<T, A>(op: &A, start: Option<&[T]>, opts: &LanczosOptions<T>) -> LanczosResult<T>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let n = op.dim();
    let owned;
    let start = match start {
        Some(s) => s,
        None => {
            owned = start_vector(n, opts.seed);
            &owned
        }
    };
    let nev = opts.nev.max(1);
    let mut converged = false;
    let k = run(op, start, opts.max_iter, opts.check_every, |t, beta| {
        let m = t.len();
        if m < nev {
            return false;
        }
        let scale = spectral_scale(t);
        let ok = (0..nev).all(|i| {
            let y = t.eigenvector(t.eigenvalue(i));
            (beta * y[m - 1]).abs() <= opts.tol * scale
        });
        converged = ok;
        ok
    });
    if k.exhausted {
        converged = true;
    }
    let m = k.t.len();
    let eigenvalues: Vec<T> = (0..nev.min(m)).map(|i| k.t.eigenvalue(i)).collect();
    let y = k.t.eigenvector(eigenvalues[0]);
    let x = ritz_vector(&k.q, &y);
    let mut ax = vec![T::zero(); n];
    op.apply(&x, &mut ax);
    let rayleigh = dot(&x, &ax);
    axpy(-rayleigh, &x, &mut ax);
    let residual = norm(&ax);
    let norm_estimate = spectral_scale(&k.t);
    if !converged {
        converged = residual <= opts.tol * norm_estimate * T::lit(10.0);
    }
    LanczosResult {
        eigenvalues,
        eigenvector: x,
        residual,
        rayleigh,
        iterations: m,
        converged,
        norm_estimate,
    }
}

#[derive(Clone, Debug)]
pub struct ExtremeEigenvalues<T> {
    pub min: T,
    pub max: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Smallest and largest eigenvalue of a symmetric operator; suited for
/// spectral norm estimates of operators only available through products.
pub fn lanczos_extremes<T, A>(op: &A, rel_tol: T, max_iter: usize, seed: u64) -> ExtremeEigenvalues<T>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
{
    let n = op.dim();
    let start = start_vector(n, seed);
    let mut converged = false;
    let k = run(op, &start, max_iter, 2, |t, beta| {
        let m = t.len();
        let scale = spectral_scale(t);
        let lo = t.eigenvector(t.eigenvalue(0));
        let hi = t.eigenvector(t.eigenvalue(m - 1));
        converged = (beta * lo[m - 1]).abs() <= rel_tol * scale && (beta * hi[m - 1]).abs() <= rel_tol * scale;
        converged
    });
    let m = k.t.len();
    ExtremeEigenvalues {
        min: k.t.eigenvalue(0),
        max: k.t.eigenvalue(m - 1),
        iterations: m,
        converged: converged || k.exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;

    fn path_laplacian(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 0.01 * i as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn finds_lowest_of_small_matrix() {
        let a = path_laplacian(60);
        let dense = a.to_dense();
        let r = lanczos_lowest(&a, None, &LanczosOptions::default());
        assert!(r.converged);
        assert!(r.residual < 1e-11);
        // Dense reference via power iteration on (c I - A).
        let c = 5.0;
        let mut x = vec![1.0; 60];
        for _ in 0..20000 {
            let ax = dense.mul_vec(&x);
            let y: Vec<f64> = x.iter().zip(&ax).map(|(a, b)| c * a - b).collect();
            let ny = norm(&y);
            x = y.into_iter().map(|v| v / ny).collect();
        }
        let ax = dense.mul_vec(&x);
        let lam = dot(&x, &ax);
        assert!((lam - r.eigenvalues[0]).abs() < 1e-9);
    }

    #[test]
    fn diagonal_exhausts_krylov_space() {
        let a = CsrMatrix::<f64>::from_diagonal(&[3.0, 1.0, 2.0, 1.0]);
        let r = lanczos_lowest(&a, None, &LanczosOptions::default());
        assert!(r.converged);
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn extremes_of_diagonal() {
        let a = CsrMatrix::from_diagonal(&(0..50).map(|i| i as f64 - 10.0).collect::<Vec<_>>());
        let e = lanczos_extremes(&a, 1e-10, 100, 7);
        assert!((e.min + 10.0).abs() < 1e-8);
        assert!((e.max - 39.0).abs() < 1e-8);
    }
}
