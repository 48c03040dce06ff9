//! Operator identities on the truncated space, evaluated on the sectors
//! where the truncation leaves them exact.
//!
//! Every residual is a max-norm over matrix entries whose column lies in
//! the guard range. The Weyl laws are written in the intertwined form
//! W X = Y W, so both sides only need Π_N W applied to vectors inside the
//! truncation, which [`weyl_apply_with`] evaluates exactly.

use serde::Serialize;

use crate::fock::ops::{annihilation, annihilator_slices, field_operator, number_expectation, second_quantize_diagonal, smeared_annihilation};
use crate::fock::{weyl_apply_with, FockBasis, FockError, ModeGrid, OneBosonFunction, WeylOperator, WeylOptions};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Serialize)]
pub struct IdentityResidual {
    pub name: String,
    pub residual: f64,
    /// Weight pushed above the cutoff by the Weyl applications involved;
    /// zero for identities that never leave the truncation.
    pub leakage: f64,
    /// Largest boson number on which the identity was asserted.
    pub guard: isize,
}

fn residual<T: Scalar>(name: &str, residual: T, leakage: T, guard: isize) -> IdentityResidual {
    IdentityResidual {
        name: name.into(),
        residual: residual.to_f64_lossy(),
        leakage: leakage.to_f64_lossy(),
        guard,
    }
}

fn column_max<T: Scalar>(m: &CsrMatrix<T>, keep: usize) -> T {
    m.triplets().filter(|&(_, c, _)| c < keep).fold(T::zero(), |acc, (_, _, v)| acc.max(v.abs()))
}

/// [a_i, a_j†] = δ_ij on the states with at most N − 1 bosons, and
/// [a_i, a_j] = 0 everywhere.
pub fn ccr_residual<T: Scalar>(basis: &FockBasis) -> Result<IdentityResidual, FockError> {
    let guard = basis.cutoff() as isize - 1;
    let keep = basis.prefix_len(guard);
    let ops: Vec<(CsrMatrix<T>, CsrMatrix<T>)> = (0..basis.modes()).map(|i| annihilation(basis, i)).collect::<Result<_, _>>()?;
    let id = CsrMatrix::<T>::identity(basis.len());
    let mut worst = T::zero();
    for (i, (ai, _)) in ops.iter().enumerate() {
        for (j, (aj, aj_dag)) in ops.iter().enumerate() {
            let mut c = ai.matmul(aj_dag).add_scaled(-T::one(), &aj_dag.matmul(ai));
            if i == j {
                c = c.add_scaled(-T::one(), &id);
            }
            worst = worst.max(column_max(&c, keep));
            if j > i {
                let z = ai.matmul(aj).add_scaled(-T::one(), &aj.matmul(ai));
                worst = worst.max(z.max_abs());
            }
        }
    }
    Ok(residual("ccr", worst, T::zero(), guard))
}

/// dΓ(f) + dΓ(g) = dΓ(f + g) on the whole truncation.
pub fn dgamma_additivity<T: Scalar>(basis: &FockBasis, f: &OneBosonFunction<T>, g: &OneBosonFunction<T>) -> IdentityResidual {
    let a = second_quantize_diagonal(basis, f);
    let b = second_quantize_diagonal(basis, g);
    let c = second_quantize_diagonal(basis, &f.add(g));
    let worst = a
        .iter()
        .zip(&b)
        .zip(&c)
        .fold(T::zero(), |m, ((x, y), z)| m.max((*x + *y - *z).abs()));
    residual("dgamma_additivity", worst, T::zero(), basis.cutoff() as isize)
}

/// [dΓ(h), a†(f)] = a†(hf) on the states with at most N − 1 bosons.
pub fn dgamma_creation<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, h: &OneBosonFunction<T>, f: &OneBosonFunction<T>) -> IdentityResidual {
    let guard = basis.cutoff() as isize - 1;
    let keep = basis.prefix_len(guard);
    let dg = CsrMatrix::from_diagonal(&second_quantize_diagonal(basis, h));
    let create = smeared_annihilation(basis, grid, f).transpose();
    let hf = f.map(|i, v| v * h.values()[i]);
    let target = smeared_annihilation(basis, grid, &hf).transpose();
    let c = dg.matmul(&create).add_scaled(-T::one(), &create.matmul(&dg)).add_scaled(-T::one(), &target);
    residual("dgamma_creation", column_max(&c, keep), T::zero(), guard)
}

/// ⟨ψ, dΓ(1)ψ⟩ = Σ_i Δk_i ‖a(k_i)ψ‖².
pub fn number_identity<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, psi: &[T]) -> IdentityResidual {
    let slices = annihilator_slices(basis, grid, psi);
    let sum = (0..grid.len()).fold(T::zero(), |acc, i| acc + grid.weight(i) * slices[i].iter().fold(T::zero(), |s, &v| s + v * v));
    residual("number_identity", (sum - number_expectation(basis, psi)).abs(), T::zero(), basis.cutoff() as isize)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylOrthogonality {
    /// ‖WᵀW − I‖_max of the dense exponential.
    pub orthogonality: f64,
    /// Leakage of W Ω, the column the orthogonality claim rests on.
    pub leakage: f64,
    /// Largest leakage over all columns; top-sector columns leak by
    /// construction, so this is informational.
    pub column_leakage: f64,
    /// |⟨Ω, W Ω⟩ − e^{−‖f‖²/2}|.
    pub vacuum: f64,
    /// Largest entry of the dense W minus the exact projection Π_N W on
    /// columns with at most N − 1 bosons; a direct view of the truncation
    /// error, controlled by the leakage.
    pub truncation: f64,
}

/// Dense checks of W(f) = exp(a†(f) − a(f)) on a small basis.
pub fn weyl_orthogonality<T: Scalar>(
    basis: &FockBasis,
    grid: &ModeGrid<T>,
    f: &OneBosonFunction<T>,
    opts: &WeylOptions<T>,
) -> Result<WeylOrthogonality, FockError> {
    let w = WeylOperator::new(basis, grid, f, opts)?;
    let n = basis.len();
    let wtw = w.matrix.transpose().matmul(&w.matrix);
    let orth = wtw.max_abs_diff(&DenseMatrix::identity(n));
    let columns = w.column_leakage(basis, grid, f, basis.cutoff() as isize);
    let norm_sq = grid.inner(f, f);
    let vacuum = (w.matrix[(0, 0)] - (-norm_sq / T::lit(2.0)).exp()).abs();
    let a = smeared_annihilation(basis, grid, f);
    let keep = basis.prefix_len(basis.cutoff() as isize - 1);
    let mut truncation = T::zero();
    for s in 0..keep {
        let mut e = vec![T::zero(); n];
        e[s] = T::one();
        let (exact, _) = weyl_apply_with(basis, &a, norm_sq, &e);
        for (r, &x) in exact.iter().enumerate() {
            truncation = truncation.max((w.matrix[(r, s)] - x).abs());
        }
    }
    Ok(WeylOrthogonality {
        orthogonality: orth.to_f64_lossy(),
        leakage: w.leakage.to_f64_lossy(),
        column_leakage: columns.to_f64_lossy(),
        vacuum: vacuum.to_f64_lossy(),
        truncation: truncation.to_f64_lossy(),
    })
}

/// Runs `law(x) -> (lhs, rhs, lost)` on every basis vector with at most
/// N − 1 bosons and compares both sides on the same sectors.
fn intertwining<T: Scalar>(basis: &FockBasis, law: impl Fn(&[T]) -> (Vec<T>, Vec<T>, T)) -> (T, T) {
    let keep = basis.prefix_len(basis.cutoff() as isize - 1);
    let mut worst = T::zero();
    let mut leak = T::zero();
    for s in 0..keep {
        let mut e = vec![T::zero(); basis.len()];
        e[s] = T::one();
        let (lhs, rhs, lost) = law(&e);
        leak = leak.max(lost);
        for r in 0..keep {
            worst = worst.max((lhs[r] - rhs[r]).abs());
        }
    }
    (worst, leak)
}

/// W(f) φ(g) W(f)* = φ(g) − 2⟨f, g⟩, checked as
/// Π W φ(g) x = Π (φ(g) − 2⟨f, g⟩) W x on the sectors below the cutoff.
pub fn weyl_field_law<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, f: &OneBosonFunction<T>, g: &OneBosonFunction<T>) -> IdentityResidual {
    let a = smeared_annihilation(basis, grid, f);
    let norm_sq = grid.inner(f, f);
    let phi = field_operator(basis, grid, g);
    let shift = T::lit(2.0) * grid.inner(f, g);
    let (worst, leak) = intertwining(basis, |x| {
        let (lhs, _) = weyl_apply_with(basis, &a, norm_sq, &phi.apply(x));
        let (wx, lost) = weyl_apply_with(basis, &a, norm_sq, x);
        let rhs: Vec<T> = phi.apply(&wx).iter().zip(&wx).map(|(p, w)| *p - shift * *w).collect();
        (lhs, rhs, lost)
    });
    residual("weyl_field_law", worst, leak, basis.cutoff() as isize - 1)
}

/// W(f) dΓ(h) W(f)* = dΓ(h) − φ(hf) + ⟨f, hf⟩, checked in the same
/// intertwined form.
pub fn weyl_dgamma_law<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, f: &OneBosonFunction<T>, h: &OneBosonFunction<T>) -> IdentityResidual {
    let a = smeared_annihilation(basis, grid, f);
    let norm_sq = grid.inner(f, f);
    let dg = second_quantize_diagonal(basis, h);
    let hf = f.map(|i, v| v * h.values()[i]);
    let phi = field_operator(basis, grid, &hf);
    let c = grid.inner(f, &hf);
    let (worst, leak) = intertwining(basis, |x| {
        let dx: Vec<T> = x.iter().zip(&dg).map(|(v, d)| *v * *d).collect();
        let (lhs, _) = weyl_apply_with(basis, &a, norm_sq, &dx);
        let (wx, lost) = weyl_apply_with(basis, &a, norm_sq, x);
        let pw = phi.apply(&wx);
        let rhs: Vec<T> = (0..wx.len()).map(|r| dg[r] * wx[r] - pw[r] + c * wx[r]).collect();
        (lhs, rhs, lost)
    });
    residual("weyl_dgamma_law", worst, leak, basis.cutoff() as isize - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laws_hold_on_a_small_space() {
        let grid = ModeGrid::<f64>::build(1, 2.0, 4).unwrap();
        let basis = FockBasis::enumerate(4, 5).unwrap();
        let f = grid.function(|k| 0.3 / (1.0 + k[0].abs()));
        let g = grid.function(|k| 0.2 * k[0]);
        let h = grid.function(|k| k[0].abs());
        assert!(ccr_residual::<f64>(&basis).unwrap().residual < 1e-12);
        assert!(dgamma_additivity(&basis, &f, &g).residual < 1e-14);
        assert!(dgamma_creation(&basis, &grid, &h, &f).residual < 1e-12);
        assert!(weyl_field_law(&basis, &grid, &f, &g).residual < 1e-12);
        assert!(weyl_dgamma_law(&basis, &grid, &f, &h).residual < 1e-12);
    }

    #[test]
    fn ccr_fails_at_the_top_sector() {
        // without the guard the commutator misses the created boson
        let basis = FockBasis::enumerate(1, 2).unwrap();
        let (a, ad) = annihilation::<f64>(&basis, 0).unwrap();
        let c = a.matmul(&ad).add_scaled(-1.0, &ad.matmul(&a));
        assert!((c.get(2, 2) + 2.0).abs() < 1e-14);
    }
}
