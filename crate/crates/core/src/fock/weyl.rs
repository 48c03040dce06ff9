use crate::fock::ops::smeared_annihilation;
use crate::fock::{FockBasis, FockError, ModeGrid, OneBosonFunction};
use crate::linalg::{dot, CsrMatrix, DenseMatrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct WeylOptions<T> {
    /// Largest basis for which a dense exponential is attempted.
    pub dense_limit: usize,
    /// Largest tolerated leakage of W(f)Ω.
    pub max_leakage: T,
}

impl<T: Scalar> Default for WeylOptions<T> {
    fn default() -> Self {
        Self {
            dense_limit: 1200,
            max_leakage: T::lit(1e-6),
        }
    }
}

/// Dense W(f) = exp(a†(f) − a(f)) on a truncated basis.
#[derive(Clone, Debug)]
pub struct WeylOperator<T> {
    pub matrix: DenseMatrix<T>,
    /// Leakage of the vacuum column, see [`leakage_of`].
    pub leakage: T,
}

/// Norm of a†(f) applied to the top sector of `x`, i.e. the weight that
/// one more step of the generator would push out of the truncation.
///
/// Uses ‖a†(f)y‖² = ‖a(f)y‖² + ‖f‖²‖y‖², so no larger basis is needed.
pub fn leakage_of<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, a: &CsrMatrix<T>, f: &OneBosonFunction<T>, x: &[T]) -> T {
    let top = basis.sector(basis.cutoff());
    let mut y = vec![T::zero(); basis.len()];
    y[top.clone()].copy_from_slice(&x[top]);
    let ay = a.apply(&y);
    (dot(&ay, &ay) + grid.inner(f, f) * dot(&y, &y)).sqrt()
}

impl<T: Scalar> WeylOperator<T> {
    pub fn new(basis: &FockBasis, grid: &ModeGrid<T>, f: &OneBosonFunction<T>, opts: &WeylOptions<T>) -> Result<Self, FockError> {
        let d = basis.len();
        if d > opts.dense_limit {
            return Err(FockError::DenseLimit {
                size: d,
                limit: opts.dense_limit,
            });
        }
        let a = smeared_annihilation(basis, grid, f);
        let gen = a.transpose().add_scaled(-T::one(), &a).to_dense();
        let matrix = gen.expm();
        let leakage = leakage_of(basis, grid, &a, f, &matrix.column(0));
        if leakage > opts.max_leakage {
            return Err(FockError::LeakageExceeded {
                leakage: leakage.to_f64_lossy(),
                threshold: opts.max_leakage.to_f64_lossy(),
            });
        }
        Ok(Self { matrix, leakage })
    }

    /// Largest leakage over the columns of states with total at most `n`.
    pub fn column_leakage(&self, basis: &FockBasis, grid: &ModeGrid<T>, f: &OneBosonFunction<T>, n: isize) -> T {
        let a = smeared_annihilation(basis, grid, f);
        (0..basis.prefix_len(n))
            .map(|j| leakage_of(basis, grid, &a, f, &self.matrix.column(j)))
            .fold(T::zero(), |m, v| m.max(v))
    }
}

pub fn weyl_operator<T: Scalar>(
    basis: &FockBasis,
    grid: &ModeGrid<T>,
    f: &OneBosonFunction<T>,
    opts: &WeylOptions<T>,
) -> Result<WeylOperator<T>, FockError> {
    WeylOperator::new(basis, grid, f, opts)
}

/// Exact projection Π_N W(f) x of the untruncated Weyl operator applied to a
/// vector supported on the truncated space.
///
/// Uses the normal-ordered form W(f) = e^{−‖f‖²/2} e^{a†(f)} e^{−a(f)}: the
/// lowering series terminates and every component up to the cutoff only
/// draws on components below it. Returns the vector and the weight lost to
/// sectors above the cutoff (‖x‖² − ‖Π_N W x‖²).
pub fn weyl_apply_projected<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, f: &OneBosonFunction<T>, x: &[T]) -> (Vec<T>, T) {
    let a = smeared_annihilation(basis, grid, f);
    weyl_apply_with(basis, &a, grid.inner(f, f), x)
}

/// As [`weyl_apply_projected`] with a prebuilt a(f) and ‖f‖².
pub fn weyl_apply_with<T: Scalar>(basis: &FockBasis, a: &CsrMatrix<T>, norm_sq: T, x: &[T]) -> (Vec<T>, T) {
    let n = basis.cutoff();
    let d = basis.len();
    // e^{-a(f)} x
    let mut lowered = x.to_vec();
    let mut term = x.to_vec();
    for j in 1..=n {
        let mut next = vec![T::zero(); d];
        a.mul_vec(&term, &mut next);
        let c = -T::one() / T::from_count(j);
        term = next.into_iter().map(|v| v * c).collect();
        lowered.iter_mut().zip(&term).for_each(|(l, &t)| *l += t);
    }
    // e^{a†(f)} y, truncated
    let mut out = lowered.clone();
    let mut term = lowered;
    for j in 1..=n {
        let mut next = vec![T::zero(); d];
        a.mul_vec_transpose_add(T::one() / T::from_count(j), &term, &mut next);
        term = next;
        out.iter_mut().zip(&term).for_each(|(o, &t)| *o += t);
    }
    let damp = (-norm_sq / T::lit(2.0)).exp();
    for v in out.iter_mut() {
        *v *= damp;
    }
    let lost = dot(x, x) - dot(&out, &out);
    (out, lost)
}
