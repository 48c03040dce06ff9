use crate::fock::field_operator;
use crate::linalg::CsrMatrix;
use crate::model::{FockSpace, ModelError, ModelSpec};

const SHIFT_TOLERANCE: f64 = 1e-10;

/// φ(v), shared by every momentum and boson mass.
pub fn interaction(space: &FockSpace, spec: &ModelSpec) -> CsrMatrix<f64> {
    field_operator(&space.basis, &space.grid, &spec.form_factor.on_grid(&space.grid))
}

/// Θ(P − P_f) + dΓ(ω_μ) per basis state.
pub fn hamiltonian_diagonal(space: &FockSpace, spec: &ModelSpec) -> Vec<f64> {
    let omega: Vec<f64> = (0..space.grid.len())
        .map(|i| spec.boson.omega(space.grid.mode(i)))
        .collect();
    let d = space.grid.dimension();
    let mut p = vec![0.0; d];
    (0..space.dim())
        .map(|s| {
            for (a, pa) in p.iter_mut().enumerate() {
                *pa = spec.momentum[a] - space.field_momentum()[a][s];
            }
            let field: f64 = space
                .basis
                .occupied(s)
                .map(|(i, n)| n as f64 * omega[i])
                .sum();
            spec.dispersion.theta(&p) + field
        })
        .collect()
}

pub fn with_interaction(phi_v: &CsrMatrix<f64>, diagonal: &[f64]) -> CsrMatrix<f64> {
    phi_v.plus_diagonal(diagonal)
}

fn check_mass(space: &FockSpace, spec: &ModelSpec) -> Result<(), ModelError> {
    if spec.boson.mu == 0.0 {
        let min_omega = (0..space.grid.len())
            .map(|i| spec.boson.omega(space.grid.mode(i)))
            .fold(f64::INFINITY, f64::min);
        if min_omega < SHIFT_TOLERANCE {
            return Err(ModelError::MassUnderflow {
                min_omega,
                tol: SHIFT_TOLERANCE,
            });
        }
    }
    Ok(())
}

/// H = Θ(P − P_f) + dΓ(ω_μ) + φ(v).
pub fn assemble_hamiltonian(space: &FockSpace, spec: &ModelSpec) -> Result<CsrMatrix<f64>, ModelError> {
    spec.validate(&space.grid)?;
    check_mass(space, spec)?;
    Ok(with_interaction(&interaction(space, spec), &hamiltonian_diagonal(space, spec)))
}
