use crate::fock::{FockBasis, FockError, ModeGrid, OneBosonFunction};
use crate::linalg::CsrMatrix;
use crate::scalar::Scalar;

/// Ladder pair (a_i, a_i†) for one mode.
pub fn annihilation<T: Scalar>(basis: &FockBasis, mode: usize) -> Result<(CsrMatrix<T>, CsrMatrix<T>), FockError> {
    if mode >= basis.modes() {
        return Err(FockError::ModeOutOfRange {
            mode,
            modes: basis.modes(),
        });
    }
    let mut trips = Vec::new();
    for (s, t) in basis.lowering_table(mode).into_iter().enumerate() {
        if let Some(t) = t {
            let n = basis.occupation(s)[mode];
            trips.push((t, s, T::from_count(n as usize).sqrt()));
        }
    }
    let d = basis.len();
    let a = CsrMatrix::from_triplets(d, d, trips);
    let adag = a.transpose();
    Ok((a, adag))
}

/// Diagonal of dΓ(multiplier): Σ_i n_i m(k_i) per state.
pub fn second_quantize_diagonal<T: Scalar>(basis: &FockBasis, multiplier: &OneBosonFunction<T>) -> Vec<T> {
    assert_eq!(multiplier.len(), basis.modes());
    let m = multiplier.values();
    (0..basis.len())
        .map(|s| {
            basis
                .occupied(s)
                .map(|(i, c)| T::from_count(c as usize) * m[i])
                .sum()
        })
        .collect()
}

pub fn second_quantize<T: Scalar>(basis: &FockBasis, multiplier: &OneBosonFunction<T>) -> CsrMatrix<T> {
    CsrMatrix::from_diagonal(&second_quantize_diagonal(basis, multiplier))
}

pub fn number_operator<T: Scalar>(basis: &FockBasis) -> CsrMatrix<T> {
    CsrMatrix::from_diagonal(&(0..basis.len()).map(|s| T::from_count(basis.total(s))).collect::<Vec<_>>())
}

/// Diagonals of the field momentum P_f = dΓ(k), one per axis.
pub fn field_momentum_diagonals<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>) -> Vec<Vec<T>> {
    (0..grid.dimension())
        .map(|a| second_quantize_diagonal(basis, &grid.function(|k| k[a])))
        .collect()
}

pub fn field_momentum<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>) -> Vec<CsrMatrix<T>> {
    field_momentum_diagonals(basis, grid)
        .into_iter()
        .map(|d| CsrMatrix::from_diagonal(&d))
        .collect()
}

/// Mode amplitudes c_i = √Δk_i f(k_i).
pub fn smeared_amplitudes<T: Scalar>(grid: &ModeGrid<T>, f: &OneBosonFunction<T>) -> Vec<T> {
    assert_eq!(f.len(), grid.len());
    (0..grid.len()).map(|i| grid.weight(i).sqrt() * f.values()[i]).collect()
}

/// a(f) = Σ_i √Δk_i f(k_i) a_i on the basis (lowering part of φ(f)).
pub fn smeared_annihilation<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, f: &OneBosonFunction<T>) -> CsrMatrix<T> {
    let c = smeared_amplitudes(grid, f);
    let mut trips = Vec::new();
    basis.for_each_lowering(|s, t, i, n| {
        if c[i] != T::zero() {
            trips.push((t, s, c[i] * T::from_count(n as usize).sqrt()));
        }
    });
    CsrMatrix::from_triplets(basis.len(), basis.len(), trips)
}

/// Block `[0, rows) × [0, cols)` of φ(f) in the ordering of `basis`.
///
/// With `rows = cols = basis.len()` this is the field operator itself; with
/// `cols` the size of a smaller-cutoff prefix it is φ(f) applied to that
/// subspace without truncating the created bosons.
pub fn field_block<T: Scalar>(
    basis: &FockBasis,
    grid: &ModeGrid<T>,
    f: &OneBosonFunction<T>,
    rows: usize,
    cols: usize,
) -> CsrMatrix<T> {
    let c = smeared_amplitudes(grid, f);
    let mut trips = Vec::new();
    basis.for_each_lowering(|s, t, i, n| {
        if c[i] == T::zero() {
            return;
        }
        let v = c[i] * T::from_count(n as usize).sqrt();
        // lowering: column s → row t
        if t < rows && s < cols {
            trips.push((t, s, v));
        }
        // raising: column t → row s
        if s < rows && t < cols {
            trips.push((s, t, v));
        }
    });
    CsrMatrix::from_triplets(rows, cols, trips)
}

/// φ(f) = Σ_i √Δk_i f(k_i)(a_i + a_i†).
pub fn field_operator<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, f: &OneBosonFunction<T>) -> CsrMatrix<T> {
    field_block(basis, grid, f, basis.len(), basis.len())
}

/// Pointwise annihilator a(k_i)ψ = a_iψ / √Δk_i.
pub fn annihilator_slice<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, psi: &[T], mode: usize) -> Vec<T> {
    assert_eq!(psi.len(), basis.len());
    let mut out = vec![T::zero(); basis.len()];
    let inv = T::one() / grid.weight(mode).sqrt();
    for (s, t) in basis.lowering_table(mode).into_iter().enumerate() {
        if let Some(t) = t {
            let n = basis.occupation(s)[mode];
            out[t] += T::from_count(n as usize).sqrt() * psi[s] * inv;
        }
    }
    out
}

/// All slices at once: `slices[i] = a(k_i)ψ`.
pub fn annihilator_slices<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, psi: &[T]) -> Vec<Vec<T>> {
    let mut out = vec![vec![T::zero(); basis.len()]; basis.modes()];
    let inv: Vec<T> = (0..grid.len()).map(|i| T::one() / grid.weight(i).sqrt()).collect();
    basis.for_each_lowering(|s, t, i, n| {
        out[i][t] += T::from_count(n as usize).sqrt() * psi[s] * inv[i];
    });
    out
}

/// Truncated exponential vector ε(g) = Σ_n (n!)^{-1/2} g^{⊗n}.
pub fn exponential_vector<T: Scalar>(basis: &FockBasis, grid: &ModeGrid<T>, g: &OneBosonFunction<T>) -> Vec<T> {
    let c = smeared_amplitudes(grid, g);
    (0..basis.len())
        .map(|s| {
            basis.occupied(s).fold(T::one(), |acc, (i, n)| {
                let mut fact = T::one();
                for j in 1..=n as usize {
                    fact *= T::from_count(j);
                }
                acc * c[i].powi(n as i32) / fact.sqrt()
            })
        })
        .collect()
}

/// Projection onto the states with total at most `n`.
pub fn project_total_at_most<T: Scalar>(basis: &FockBasis, x: &[T], n: isize) -> Vec<T> {
    let keep = basis.prefix_len(n);
    x.iter()
        .enumerate()
        .map(|(s, &v)| if s < keep { v } else { T::zero() })
        .collect()
}

/// Per-sector squared norms ‖ψ^(n)‖².
pub fn sector_weights<T: Scalar>(basis: &FockBasis, x: &[T]) -> Vec<T> {
    (0..=basis.cutoff())
        .map(|n| x[basis.sector(n)].iter().map(|&v| v * v).sum())
        .collect()
}

pub fn number_expectation<T: Scalar>(basis: &FockBasis, x: &[T]) -> T {
    x.iter()
        .enumerate()
        .map(|(s, &v)| T::from_count(basis.total(s)) * v * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn single_mode_ladder_matrix() {
        let b = FockBasis::enumerate(1, 2).unwrap();
        let (a, adag) = annihilation::<f64>(&b, 0).unwrap();
        let d = a.to_dense();
        let s2 = 2f64.sqrt();
        let want = [[0.0, 1.0, 0.0], [0.0, 0.0, s2], [0.0, 0.0, 0.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(d[(r, c)], want[r][c]);
            }
        }
        assert_eq!(adag.to_dense(), d.transpose());
    }

    #[test]
    fn single_mode_field() {
        let g = ModeGrid::<f64>::build(1, 1.0, 2).unwrap();
        // Use only one of the modes via a function vanishing on the other.
        let b = FockBasis::enumerate(2, 1).unwrap();
        let c = 0.7;
        let f = OneBosonFunction(vec![c, 0.0]);
        let phi = field_operator(&b, &g, &f);
        let w: f64 = g.weight(0);
        assert!((phi.get(0, 1) - c * w.sqrt()).abs() < 1e-15);
        assert!((phi.get(1, 0) - c * w.sqrt()).abs() < 1e-15);
        assert_eq!(phi.nnz(), 2);
    }

    #[test]
    fn vacuum_field_square_is_norm() {
        let g = ModeGrid::<f64>::build(1, 2.0, 6).unwrap();
        let b = FockBasis::enumerate(6, 2).unwrap();
        let f = g.function(|k| (k[0] * 0.9).sin() + 0.3);
        let phi = field_operator(&b, &g, &f);
        let mut vac = vec![0.0; b.len()];
        vac[0] = 1.0;
        let p1 = phi.apply(&vac);
        assert!((dot(&p1, &p1) - g.inner(&f, &f)).abs() < 1e-14);
    }

    #[test]
    fn dgamma_momentum_of_symmetric_pair() {
        let g = ModeGrid::<f64>::build(1, 2.0, 2).unwrap();
        let b = FockBasis::enumerate(2, 2).unwrap();
        let pf = field_momentum_diagonals(&b, &g);
        let s = b.index_of(&[1, 1]).unwrap();
        assert_eq!(pf[0][s], 0.0);
        assert_eq!(pf[0][0], 0.0);
    }

    #[test]
    fn slices_of_one_boson_state() {
        let g = ModeGrid::<f64>::build(1, 1.0, 4).unwrap();
        let b = FockBasis::enumerate(4, 2).unwrap();
        let mut psi = vec![0.0; b.len()];
        psi[b.index_of(&[0, 0, 1, 0]).unwrap()] = 1.0;
        for i in 0..4 {
            let sl = annihilator_slice(&b, &g, &psi, i);
            let expect = if i == 2 { 1.0 / g.weight(2).sqrt() } else { 0.0 };
            assert!((sl[0] - expect).abs() < 1e-15);
            assert!(sl[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn exponential_vector_single_mode() {
        let g = ModeGrid::<f64>::build(1, 1.0, 2).unwrap();
        let b = FockBasis::enumerate(2, 4).unwrap();
        let f = OneBosonFunction(vec![0.0, 0.8]);
        let e = exponential_vector(&b, &g, &f);
        let c = 0.8 * g.weight(1).sqrt();
        let mut fact = 1.0;
        for n in 0..=4 {
            if n > 0 {
                fact *= n as f64;
            }
            let s = b.index_of(&[0, n as u8]).unwrap();
            assert!((e[s] - c.powi(n) / fact.sqrt()).abs() < 1e-14);
        }
        let zero = exponential_vector(&b, &g, &OneBosonFunction::zeros(2));
        assert_eq!(zero[0], 1.0);
        assert!(zero[1..].iter().all(|&v| v == 0.0));
    }
}
