use nalgebra::{DMatrix, SymmetricEigen};

use crate::fock::{field_block, field_operator, FockBasis, OneBosonFunction};
use crate::linalg::{CsrMatrix, DenseMatrix, LinearOperator};
use crate::model::{DispersionKind, FockSpace, ModelError, ModelSpec};

/// Default largest basis for the dense semirelativistic square root.
pub const DENSE_SQRT_LIMIT: usize = 1500;

#[derive(Clone, Debug)]
pub enum Kinetic {
    /// Σ_j V_jᵀV_j/(2M) with V_j the j-th kinetic component mapping the
    /// truncated space into the basis with one more boson.
    Nonrelativistic { v: Vec<CsrMatrix<f64>>, inv_two_mass: f64 },
    Semirelativistic { dense: DenseMatrix<f64> },
}

/// Compression of T(P, f) to the truncated space.
///
/// The kinetic square is formed on the space with one extra boson before
/// projecting back, so the operator is exactly Π T(P, f) Π; truncating the
/// kinetic vector first would drop the top-sector contributions of φ(k f)².
#[derive(Clone, Debug)]
pub struct TransformedOperator {
    dim: usize,
    pub kinetic: Kinetic,
    /// dΓ(ω) − φ(ωf) + s(f, ωf) + φ(v) − 2 s(f, v)
    pub rest: CsrMatrix<f64>,
}

impl TransformedOperator {
    pub fn to_dense(&self) -> DenseMatrix<f64> {
        let rest = self.rest.to_dense();
        match &self.kinetic {
            Kinetic::Nonrelativistic { .. } => self.to_csr().to_dense(),
            Kinetic::Semirelativistic { dense } => rest.add_scaled(1.0, dense),
        }
    }

    /// Sparse form; only available for the nonrelativistic kinetic term.
    pub fn to_csr(&self) -> CsrMatrix<f64> {
        match &self.kinetic {
            Kinetic::Nonrelativistic { v, inv_two_mass } => {
                let mut k = CsrMatrix::zeros(self.dim, self.dim);
                for vj in v {
                    k = k.add_scaled(1.0, &vj.transpose().matmul(vj));
                }
                k.scale(*inv_two_mass).add_scaled(1.0, &self.rest)
            }
            Kinetic::Semirelativistic { dense } => {
                let mut trips = Vec::new();
                for r in 0..self.dim {
                    for c in 0..self.dim {
                        if dense[(r, c)] != 0.0 {
                            trips.push((r, c, dense[(r, c)]));
                        }
                    }
                }
                CsrMatrix::from_triplets(self.dim, self.dim, trips).add_scaled(1.0, &self.rest)
            }
        }
    }
}

impl LinearOperator<f64> for TransformedOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.rest.mul_vec(x, y);
        match &self.kinetic {
            Kinetic::Nonrelativistic { v, inv_two_mass } => {
                let mut t = vec![0.0; v.first().map_or(0, |m| m.nrows())];
                for vj in v {
                    vj.mul_vec(x, &mut t);
                    vj.mul_vec_transpose_add(*inv_two_mass, &t, y);
                }
            }
            Kinetic::Semirelativistic { dense } => {
                for (yi, di) in y.iter_mut().zip(dense.mul_vec(x)) {
                    *yi += di;
                }
            }
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let mut d = self.rest.diagonal();
        match &self.kinetic {
            Kinetic::Nonrelativistic { v, inv_two_mass } => {
                for vj in v {
                    for (r, c, val) in vj.triplets() {
                        let _ = r;
                        d[c] += inv_two_mass * val * val;
                    }
                }
            }
            Kinetic::Semirelativistic { dense } => {
                for (i, di) in d.iter_mut().enumerate() {
                    *di += dense[(i, i)];
                }
            }
        }
        Some(d)
    }
}

fn kinetic_components(space: &FockSpace, big: &FockBasis, spec: &ModelSpec, f: &OneBosonFunction<f64>) -> Vec<CsrMatrix<f64>> {
    let grid = &space.grid;
    let rows = big.len();
    let cols = space.dim();
    (0..grid.dimension())
        .map(|a| {
            let kf = f.map(|i, v| grid.mode(i)[a] * v);
            let shift = grid.inner(f, &kf);
            let phi = field_block(big, grid, &kf, rows, cols);
            let diag: Vec<(usize, usize, f64)> = (0..cols)
                .map(|s| (s, s, spec.momentum[a] - space.field_momentum()[a][s] - shift))
                .collect();
            let mut trips: Vec<_> = phi.triplets().collect();
            trips.extend(diag);
            CsrMatrix::from_triplets(rows, cols, trips)
        })
        .collect()
}

/// T(P, f) = Θ(v_P(f)) + dΓ(ω) − φ(ωf) + s(f,ωf) + φ(v) − 2 s(f,v),
/// v_P(f) = P − P_f + φ(k f) − s(f, k f), compressed to the truncated space.
pub fn assemble_transformed(space: &FockSpace, spec: &ModelSpec, f: &OneBosonFunction<f64>) -> Result<TransformedOperator, ModelError> {
    assemble_transformed_with_limit(space, spec, f, DENSE_SQRT_LIMIT)
}

pub fn assemble_transformed_with_limit(
    space: &FockSpace,
    spec: &ModelSpec,
    f: &OneBosonFunction<f64>,
    dense_limit: usize,
) -> Result<TransformedOperator, ModelError> {
    spec.validate(&space.grid)?;
    let grid = &space.grid;
    let dim = space.dim();
    if spec.dispersion.kind == DispersionKind::Semirelativistic && dim > dense_limit {
        return Err(ModelError::DenseLimit { size: dim, limit: dense_limit });
    }
    let owned;
    let big = match &space.extended {
        Some(b) => b,
        None => {
            owned = FockBasis::enumerate_with_limit(grid.len(), space.basis.cutoff() + 1, usize::MAX)?;
            &owned
        }
    };
    let omega = spec.boson.on_grid(grid);
    let v = spec.form_factor.on_grid(grid);
    let wf = f.map(|i, x| omega.values()[i] * x);
    let constant = grid.inner(f, &wf) - 2.0 * grid.inner(f, &v);
    let dgamma: Vec<f64> = (0..dim)
        .map(|s| {
            space
                .basis
                .occupied(s)
                .map(|(i, n)| n as f64 * omega.values()[i])
                .sum::<f64>()
                + constant
        })
        .collect();
    let rest = field_operator(&space.basis, grid, &v.sub(&wf)).plus_diagonal(&dgamma);
    let comps = kinetic_components(space, big, spec, f);
    let kinetic = match spec.dispersion.kind {
        DispersionKind::Nonrelativistic => Kinetic::Nonrelativistic {
            v: comps,
            inv_two_mass: spec.dispersion.inv_two_mass(),
        },
        DispersionKind::Semirelativistic => {
            let mut k2 = DMatrix::<f64>::zeros(dim, dim);
            for vj in &comps {
                let prod = vj.transpose().matmul(vj);
                for (r, c, val) in prod.triplets() {
                    k2[(r, c)] += val;
                }
            }
            let k2 = (&k2 + k2.transpose()) * 0.5;
            let eig = SymmetricEigen::new(k2);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -1e-10 {
                return Err(ModelError::NotPositive(min));
            }
            let m2 = spec.dispersion.mass * spec.dispersion.mass;
            let roots = eig.eigenvalues.map(|l| (l.max(0.0) + m2).sqrt());
            let u = &eig.eigenvectors;
            let root = u * DMatrix::from_diagonal(&roots) * u.transpose();
            Kinetic::Semirelativistic {
                dense: DenseMatrix::from_fn(dim, dim, |r, c| 0.5 * (root[(r, c)] + root[(c, r)])),
            }
        }
    };
    Ok(TransformedOperator { dim, kinetic, rest })
}
